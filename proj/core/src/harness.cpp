#include "peer/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace peer {

namespace {

constexpr double kGridTol = 1e-12;
constexpr double kReferenceTol = 1e-11;

double slope_loglog(const std::vector<double>& x,
                    const std::vector<double>& y) {
  const auto n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

const VectorXd& require_initial(const SplitProblem& problem) {
  if (!problem.initial)
    throw std::invalid_argument(problem.label +
                                ": problem carries no initial state");
  return *problem.initial;
}

// every r-th point of a trajectory, aligned so returned point j sits at
// the original index (j+1)*r - 1
Trajectory subsample(const Trajectory& traj, long long r) {
  Trajectory out;
  const auto n = static_cast<long long>(traj.t.size());
  for (long long j = r - 1; j < n; j += r) {
    out.t.push_back(traj.t[j]);
    out.u.push_back(traj.u[j]);
  }
  return out;
}

void append_num(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  s += buf;
}

void write_file(const std::string& content, const std::string& destination) {
  std::ofstream ofs(destination, std::ios::binary | std::ios::trunc);
  if (!ofs)
    throw std::runtime_error("cannot open for writing: " + destination);
  ofs.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!ofs) throw std::runtime_error("write failed: " + destination);
}

}  // namespace

double scaled_max_error(const Trajectory& approx, const Trajectory& reference) {
  if (approx.t.size() != reference.t.size())
    throw std::invalid_argument("trajectories have different lengths");
  double err = 0.0;
  for (std::size_t n = 0; n < approx.t.size(); ++n) {
    if (std::abs(approx.t[n] - reference.t[n]) >
        kGridTol * std::max(1.0, std::abs(reference.t[n])))
      throw std::invalid_argument("trajectory grids differ");
    const VectorXd& U = approx.u[n];
    const VectorXd& u = reference.u[n];
    if (U.size() != u.size())
      throw std::invalid_argument("trajectory dimensions differ");
    for (Eigen::Index i = 0; i < u.size(); ++i)
      err = std::max(err, std::abs(U(i) - u(i)) / (1.0 + std::abs(u(i))));
  }
  return err;
}

Trajectory reference_solution(const SplitProblem& problem,
                              const std::vector<double>& t_grid, double tol,
                              const SolverConfig& config) {
  if (tol < 1e-13) throw std::invalid_argument("reference tol must be >= 1e-13");
  if (t_grid.empty()) throw std::invalid_argument("empty time grid");
  const double dt0 = t_grid.front();
  if (!(dt0 > 0.0)) throw std::invalid_argument("grid must start after t=0");
  for (std::size_t k = 0; k < t_grid.size(); ++k)
    if (std::abs(t_grid[k] - (k + 1) * dt0) >
        kGridTol * std::max(1.0, std::abs(t_grid[k])))
      throw std::invalid_argument("reference requires a uniform grid");

  if (problem.exact) {
    Trajectory out;
    out.t = t_grid;
    for (double t : t_grid) out.u.push_back(problem.exact(t));
    return out;
  }

  const VectorXd& u0 = require_initial(problem);
  const PeerCoefficients ref_method = builtin_method(4);
  const double t_end = dt0 * static_cast<double>(t_grid.size());
  Trajectory prev = integrate(ref_method, problem, u0, t_end, dt0, config);
  long long r = 1;
  for (int k = 1; k <= 10; ++k) {
    r *= 2;
    const Trajectory fine =
        integrate(ref_method, problem, u0, t_end, dt0 / static_cast<double>(r),
                  config);
    Trajectory cur = subsample(fine, r);
    const double diff = scaled_max_error(prev, cur);
    if (diff <= tol) return cur;
    prev = std::move(cur);
  }
  throw std::runtime_error("reference solution did not converge within 10 refinements");
}

double fit_order(const std::vector<ConvergenceEntry>& entries) {
  std::vector<double> dts, errs;
  for (const auto& e : entries) {
    if (!e.ok || !(e.error > 0.0)) continue;
    dts.push_back(e.dt);
    errs.push_back(e.error);
  }
  return slope_loglog(dts, errs);
}

ConvergenceReport convergence_study(const RunSpec& spec) {
  if (spec.dts.size() < 3)
    throw std::invalid_argument("convergence study needs >= 3 step sizes");
  for (std::size_t i = 0; i < spec.dts.size(); ++i) {
    if (!(spec.dts[i] > 0.0))
      throw std::invalid_argument("step sizes must be positive");
    if (i > 0 && !(spec.dts[i] < spec.dts[i - 1]))
      throw std::invalid_argument("step sizes must be strictly decreasing");
  }
  const VectorXd& u0 = require_initial(spec.problem);

  const double dt_min = spec.dts.back();
  const long long n_min = std::llround(spec.t_end / dt_min);
  if (n_min < 1 || std::abs(n_min * dt_min - spec.t_end) >
                       kGridTol * std::max(1.0, std::abs(spec.t_end)))
    throw std::invalid_argument("finest step size must divide t_end");
  std::vector<double> grid_min(n_min);
  for (long long i = 0; i < n_min; ++i) grid_min[i] = (i + 1) * dt_min;

  const Trajectory ref =
      reference_solution(spec.problem, grid_min, kReferenceTol, spec.config);

  ConvergenceReport report;
  report.method_label = spec.method_label;
  report.problem_label = spec.problem.label;
  report.epsilon = spec.epsilon;
  report.reference_desc =
      spec.problem.exact ? "closed-form solution"
                         : "self-refined builtin:s4, tol 1e-11";

  for (double dt : spec.dts) {
    ConvergenceEntry entry;
    entry.dt = dt;
    try {
      const Trajectory traj =
          integrate(spec.method, spec.problem, u0, spec.t_end, dt, spec.config);
      const long long r = std::llround(dt / dt_min);
      Trajectory ref_here;
      if (r >= 1 && std::abs(r * dt_min - dt) <= kGridTol)
        ref_here = subsample(ref, r);
      else
        ref_here =
            reference_solution(spec.problem, traj.t, kReferenceTol, spec.config);
      entry.error = scaled_max_error(traj, ref_here);
      entry.ok = true;
    } catch (const SolveError&) {
      entry.ok = false;
    }
    report.entries.push_back(entry);
  }

  int successes = 0;
  for (const auto& e : report.entries) successes += e.ok ? 1 : 0;
  if (successes < 3)
    throw std::runtime_error("convergence study: fewer than 3 step sizes succeeded");
  report.fitted_order = fit_order(report.entries);
  return report;
}

namespace {

StageBlock equilibrium_block(const SplitProblem& problem, const VectorXd& ustar,
                             double dt, int s) {
  StageBlock block;
  block.t_n = 0.0;
  block.dt = dt;
  for (int i = 0; i < s; ++i) {
    block.stages.push_back(ustar);
    block.f0_vals.push_back(problem.f0(ustar));
    block.f1_vals.push_back(problem.f1(ustar));
  }
  return block;
}

double block_drift(const StageBlock& a, const StageBlock& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.stages.size(); ++i)
    d = std::max(d, (a.stages[i] - b.stages[i]).cwiseAbs().maxCoeff());
  return d;
}

}  // namespace

WbReport wb_test(const PeerCoefficients& method, const SplitProblem& problem,
                 int n_steps, double dt,
                 const std::vector<double>& perturbations,
                 const SolverConfig& config) {
  if (!problem.equilibrium)
    throw std::invalid_argument(problem.label +
                                ": problem carries no equilibrium");
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  const VectorXd& ustar = *problem.equilibrium;

  WbReport report;
  StageBlock block = equilibrium_block(problem, ustar, dt, method.s);
  for (int n = 0; n < n_steps; ++n) {
    StageBlock next = step(method, problem, block, config);
    report.exact_drift = std::max(report.exact_drift, block_drift(next, block));
    block = std::move(next);
  }

  for (double eps : perturbations) {
    StageBlock pert = equilibrium_block(problem, ustar, dt, method.s);
    for (int i = 0; i + 1 < method.s; ++i) {
      pert.stages[i].array() += eps;
      pert.f0_vals[i] = problem.f0(pert.stages[i]);
      pert.f1_vals[i] = problem.f1(pert.stages[i]);
    }
    const StageBlock next = step(method, problem, pert, config);
    WbPerturbation p;
    p.epsilon = eps;
    p.drift = block_drift(next, pert);
    p.ratio = p.drift / eps;
    report.perturbations.push_back(p);
  }

  const long long dyn_steps = std::llround(15.0 / dt);
  const bool dyn_fits =
      dyn_steps >= 1 && std::abs(dyn_steps * dt - 15.0) <= 1.5e-11;
  if (problem.initial && dyn_fits) {
    const Trajectory traj =
        integrate(method, problem, *problem.initial, 15.0, dt, config);
    for (const VectorXd& u : traj.u)
      report.distances.push_back((u - ustar).cwiseAbs().maxCoeff());
    report.final_distance = report.distances.back();
    report.tail_nonincreasing = true;
    const std::size_t n = report.distances.size();
    for (std::size_t k = (n > 5 ? n - 5 : 1); k < n; ++k)
      if (report.distances[k] > report.distances[k - 1] + 1e-14)
        report.tail_nonincreasing = false;
  }
  return report;
}

ApReport ap_test(const PeerCoefficients& method, const RelaxationProblem& rp,
                 const std::vector<double>& epsilons, double dt, double t_end,
                 const SolverConfig& config) {
  if (epsilons.empty()) throw std::invalid_argument("empty epsilon list");
  const VectorXd u0_cons = rp.structure.C * require_initial(rp.full);
  const VectorXd u0 = well_prepared_data(rp, u0_cons);

  const SplitProblem limit = limit_problem(rp);
  const Trajectory limit_traj =
      integrate(method, limit, u0_cons, t_end, dt, config);

  ApReport report;
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
    SplitProblem full = rp.full;
    full.f1 = [G = rp.structure.source, eps](const VectorXd& u) -> VectorXd {
      return G(u) / eps;
    };
    if (rp.full.jac1)
      full.jac1 = [J = rp.full.jac1,
                   scale = rp.epsilon / eps](const VectorXd& u) -> MatrixXd {
        return J(u) * scale;
      };
    const Trajectory traj = integrate(method, full, u0, t_end, dt, config);

    ApEntry entry;
    entry.epsilon = eps;
    entry.residual = equilibrium_residual(rp, traj);
    Trajectory projected;
    projected.t = traj.t;
    for (const VectorXd& u : traj.u) projected.u.push_back(rp.structure.C * u);
    entry.projection_gap = scaled_max_error(projected, limit_traj);
    report.entries.push_back(entry);
  }

  std::vector<double> eps_pts, res_pts;
  for (const auto& e : report.entries)
    if (e.residual > 0.0) {
      eps_pts.push_back(e.epsilon);
      res_pts.push_back(e.residual);
    }
  report.residual_slope = slope_loglog(eps_pts, res_pts);
  return report;
}

std::string serialize_trajectory_csv(const Trajectory& traj) {
  if (traj.u.empty()) throw std::invalid_argument("empty trajectory");
  const auto m = traj.u.front().size();
  std::string out = "t";
  for (Eigen::Index i = 1; i <= m; ++i) out += ",u" + std::to_string(i);
  out += '\n';
  for (std::size_t n = 0; n < traj.t.size(); ++n) {
    append_num(out, traj.t[n]);
    for (Eigen::Index i = 0; i < m; ++i) {
      out += ',';
      append_num(out, traj.u[n](i));
    }
    out += '\n';
  }
  return out;
}

std::string serialize_convergence_csv(const ConvergenceReport& report) {
  std::string out = "dt,error\n";
  for (const auto& e : report.entries) {
    if (!e.ok) continue;
    append_num(out, e.dt);
    out += ',';
    append_num(out, e.error);
    out += '\n';
  }
  out += "# fitted_order=";
  append_num(out, report.fitted_order);
  out += '\n';
  return out;
}

void emit_csv(const Trajectory& traj, const std::string& destination) {
  write_file(serialize_trajectory_csv(traj), destination);
}

void emit_csv(const ConvergenceReport& report, const std::string& destination) {
  write_file(serialize_convergence_csv(report), destination);
}

}  // namespace peer
