#pragma once

#include "peer/problems.hpp"

#include <limits>

namespace peer {

struct ConvergenceEntry {
  double dt = 0.0;
  double error = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
};

struct ConvergenceReport {
  std::string method_label;
  std::string problem_label;
  std::string reference_desc;
  std::optional<double> epsilon;
  std::vector<ConvergenceEntry> entries;  // dt strictly decreasing
  double fitted_order = std::numeric_limits<double>::quiet_NaN();
};

// A fully materialized sweep request: method, problem, step sizes
// (strictly decreasing, >= 3), horizon, solver configuration.
struct RunSpec {
  PeerCoefficients method;
  std::string method_label;
  SplitProblem problem;
  std::vector<double> dts;
  double t_end = 5.0;
  std::optional<double> epsilon;  // annotation carried into the report
  SolverConfig config;
};

// max over shared grid points and components of |U_i - u_i| / (1 + |u_i|),
// reference in the denominator.  Grids must agree to 1e-12.
double scaled_max_error(const Trajectory& approx, const Trajectory& reference);

// Reference trajectory on a uniform grid: the problem's closed form if it
// has one, otherwise the 4-stage built-in method self-refined by step
// halving until two successive refinements agree to tol (at most 10
// halvings).  Starts from problem.initial.
Trajectory reference_solution(const SplitProblem& problem,
                              const std::vector<double>& t_grid, double tol,
                              const SolverConfig& config = {});

// Least-squares slope of log(error) vs log(dt) over successful entries
// with positive error; NaN when fewer than two such entries remain.
double fit_order(const std::vector<ConvergenceEntry>& entries);

// Integrates at every step size of the sweep, measures against a shared
// reference on the finest grid, and fits the order.  Individual step sizes
// that fail to integrate are marked failed; at least 3 must succeed.
ConvergenceReport convergence_study(const RunSpec& spec);

struct WbPerturbation {
  double epsilon = 0.0;
  double drift = 0.0;
  double ratio = 0.0;  // drift / epsilon
};

struct WbReport {
  // max stage drift per step over n_steps starting from the constant
  // equilibrium stage block
  double exact_drift = 0.0;
  // one-step drift after adding epsilon to every component of the
  // non-last stages of the equilibrium block
  std::vector<WbPerturbation> perturbations;
  // distances ||u_n - u*||_inf of the run from problem.initial to t = 15
  std::vector<double> distances;
  double final_distance = std::numeric_limits<double>::quiet_NaN();
  bool tail_nonincreasing = false;  // over the last 5 steps
};

WbReport wb_test(const PeerCoefficients& method, const SplitProblem& problem,
                 int n_steps = 100, double dt = 1.0,
                 const std::vector<double>& perturbations = {1e-3, 1e-6},
                 const SolverConfig& config = {});

struct ApEntry {
  double epsilon = 0.0;
  double residual = 0.0;        // max_n ||G(U_n)||_inf
  double projection_gap = 0.0;  // scaled max error of C U_n vs limit run
};

struct ApReport {
  std::vector<ApEntry> entries;
  // least-squares slope of log(residual) vs log(epsilon)
  double residual_slope = std::numeric_limits<double>::quiet_NaN();
};

// For each epsilon: integrate the full system from well-prepared data,
// record the equilibrium residual, and compare the conserved projection
// with the same method run explicitly on the limit problem.
ApReport ap_test(const PeerCoefficients& method, const RelaxationProblem& rp,
                 const std::vector<double>& epsilons, double dt,
                 double t_end = 5.0, const SolverConfig& config = {});

// CSV serialization: 17 significant digits, '\n' line ends, deterministic
// bytes.  Trajectories: header t,u1,...,um then one row per step.
// Convergence: header dt,error, successful rows, footer
// `# fitted_order=<value>`.
std::string serialize_trajectory_csv(const Trajectory& traj);
std::string serialize_convergence_csv(const ConvergenceReport& report);
void emit_csv(const Trajectory& traj, const std::string& destination);
void emit_csv(const ConvergenceReport& report, const std::string& destination);

}  // namespace peer
