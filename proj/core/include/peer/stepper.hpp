#pragma once

#include "peer/coefficients.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace peer {

// Additively split right-hand side u' = F0(u) + F1(u); F0 is treated
// explicitly, F1 implicitly.  f0/f1 must be deterministic and
// side-effect-free.  jac1 and exact are optional (empty std::function);
// equilibrium, if present, satisfies ||f0(u*) + f1(u*)||_inf <= 1e-13 (1 +
// ||u*||_inf).
struct SplitProblem {
  int dim = 0;
  std::function<VectorXd(const VectorXd&)> f0;
  std::function<VectorXd(const VectorXd&)> f1;
  std::function<MatrixXd(const VectorXd&)> jac1;  // Jacobian of F1
  std::optional<VectorXd> equilibrium;
  std::string label;
  std::optional<VectorXd> initial;          // canonical initial state
  std::function<VectorXd(double)> exact;    // closed-form solution, if any
};

// The s stacked stage vectors of one step, with cached F0/F1 evaluations.
// Stage i approximates u(t_n + c_i dt).
struct StageBlock {
  double t_n = 0.0;
  double dt = 0.0;
  std::vector<VectorXd> stages;
  std::vector<VectorXd> f0_vals;
  std::vector<VectorXd> f1_vals;
};

struct SolverConfig {
  double newton_abs_tol = 1e-12;
  double newton_rel_tol = 1e-10;
  int newton_max_iter = 25;
  double fd_jacobian_eps_scale = 1.4901161193847656e-08;  // sqrt(eps)
  int starting_substeps_initial = 16;
  double starting_tol = 1e-12;
};

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& message, int stage_index, double last_residual)
      : std::runtime_error(message),
        stage_index_(stage_index),
        last_residual_(last_residual) {}
  int stage_index() const { return stage_index_; }
  double last_residual() const { return last_residual_; }

 private:
  int stage_index_;
  double last_residual_;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<VectorXd> u;
};

// Forward-difference Jacobian, column j incremented by eps_scale (1 + |u_j|).
MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f,
                     const VectorXd& u, double eps_scale);

// Solves w = rhs + dt_gamma F1(w) given the residual map
// g(w) = w - rhs - dt_gamma F1(w).  Newton iteration matrix
// I - dt_gamma J_F1; the Jacobian is reused across iterations and refreshed
// when the residual contracts slower than a factor 2.  Succeeds when
// ||g(w)||_inf <= newton_abs_tol + newton_rel_tol ||w||_inf.
VectorXd newton_solve_stage(
    const std::function<VectorXd(const VectorXd&)>& g, const VectorXd& guess,
    const std::function<MatrixXd(const VectorXd&)>& jacobian_of_f1,
    double dt_gamma, const SolverConfig& config);

// One step: stages are solved in index order; only the diagonal of R couples
// implicitly (R lower triangular with diagonal gamma; Rhat = R S2 strictly
// lower), so each stage needs a single m-dimensional Newton solve.  The
// Newton initial guess is the extrapolated predictor sum_j (V0 V1^{-1})_ij
// w_{n,j}.
StageBlock step(const PeerCoefficients& coeffs, const SplitProblem& problem,
                const StageBlock& block, const SolverConfig& config = {});

// Starting block for the two-step recurrence: each stage integrates from t=0
// to c_i dt with K substeps of first-order IMEX Euler
// (u+ = u + h F0(u) + h F1(u+)), K doubling from starting_substeps_initial;
// the doubling ladder is Richardson-extrapolated (tableau depth up to 4) and
// stops once successive tableau diagonals agree to starting_tol in the
// scaled max norm.  If the problem exposes an exact solution it is used
// directly.
StageBlock initialize_stages(const PeerCoefficients& coeffs,
                             const SplitProblem& problem, const VectorXd& u0,
                             double dt, const SolverConfig& config = {});

// Repeated stepping from t = 0; records the last-stage value (c_s = 1) at
// every multiple of dt from dt to t_end.  dt must divide t_end to 1e-12.
Trajectory integrate(const PeerCoefficients& coeffs,
                     const SplitProblem& problem, const VectorXd& u0,
                     double t_end, double dt, const SolverConfig& config = {});

}  // namespace peer
