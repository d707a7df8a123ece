#include "peer/stepper.hpp"

#include <cmath>

namespace peer {

namespace {

// scaled max norm of the difference between two states
double scaled_diff(const VectorXd& a, const VectorXd& b) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a(i) - b(i)) / (1.0 + std::abs(b(i))));
  return m;
}

std::function<MatrixXd(const VectorXd&)> jacobian_provider(
    const SplitProblem& problem, const SolverConfig& config) {
  if (problem.jac1) return problem.jac1;
  return [f1 = problem.f1, eps = config.fd_jacobian_eps_scale](
             const VectorXd& u) { return fd_jacobian(f1, u, eps); };
}

// extrapolation operator V0 V1^{-1} (stage values at c from values at c - e)
MatrixXd predictor_matrix(const PeerCoefficients& coeffs) {
  const MatrixXd v0 = vandermonde(coeffs.c, 0.0);
  const MatrixXd v1 = vandermonde(coeffs.c, 1.0);
  return v1.transpose().partialPivLu().solve(v0.transpose()).transpose();
}

void require_config(const SolverConfig& config) {
  if (!(config.newton_abs_tol > 0.0) || !(config.newton_rel_tol > 0.0) ||
      !(config.fd_jacobian_eps_scale > 0.0) || !(config.starting_tol > 0.0))
    throw std::invalid_argument("solver tolerances must be positive");
  if (config.newton_max_iter < 1)
    throw std::invalid_argument("newton_max_iter must be at least 1");
  if (config.starting_substeps_initial < 1)
    throw std::invalid_argument("starting_substeps_initial must be at least 1");
}

void require_stepper_nodes(const PeerCoefficients& coeffs, bool unit_interval) {
  for (int i = 0; i < coeffs.s; ++i) {
    if (coeffs.c(i) < 0.0)
      throw SolveError("stepper requires nonnegative nodes", i, 0.0);
    if (unit_interval && coeffs.c(i) > 1.0 + 1e-12)
      throw SolveError("starting procedure requires nodes in [0,1]", i, 0.0);
  }
}

}  // namespace

MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f,
                     const VectorXd& u, double eps_scale) {
  const VectorXd base = f(u);
  const auto m = base.size();
  MatrixXd jac(m, u.size());
  VectorXd up = u;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double h = eps_scale * (1.0 + std::abs(u(j)));
    up(j) = u(j) + h;
    jac.col(j) = (f(up) - base) / h;
    up(j) = u(j);
  }
  return jac;
}

VectorXd newton_solve_stage(
    const std::function<VectorXd(const VectorXd&)>& g, const VectorXd& guess,
    const std::function<MatrixXd(const VectorXd&)>& jacobian_of_f1,
    double dt_gamma, const SolverConfig& config) {
  if (dt_gamma <= 0.0)
    throw std::invalid_argument("dt_gamma must be positive");
  require_config(config);
  const auto m = guess.size();
  VectorXd w = guess;
  VectorXd res = g(w);
  double res_norm = res.cwiseAbs().maxCoeff();
  auto tol = [&](const VectorXd& v) {
    return config.newton_abs_tol +
           config.newton_rel_tol * v.cwiseAbs().maxCoeff();
  };
  auto at_floor = [](double r, const VectorXd& v) {
    return r <= 1e-14 * (1.0 + v.cwiseAbs().maxCoeff());
  };
  // accept the guess outright only at the evaluation floor; a guess that
  // merely clears the tolerance still gets an iteration, otherwise the
  // accepted-residual bias (up to the tolerance, per stage) accumulates
  // across long integrations
  if (res_norm <= tol(w) && at_floor(res_norm, w)) return w;

  Eigen::FullPivLU<MatrixXd> lu;
  bool have_lu = false;
  int growth_streak = 0;
  for (int it = 0; it < config.newton_max_iter; ++it) {
    if (!have_lu) {
      lu.compute(MatrixXd::Identity(m, m) - dt_gamma * jacobian_of_f1(w));
      lu.setThreshold(1e-13);
      if (!lu.isInvertible())
        throw SolveError("singular Newton iteration matrix", -1, res_norm);
      have_lu = true;
    }
    w -= lu.solve(res);
    res = g(w);
    const double next_norm = res.cwiseAbs().maxCoeff();
    if (!std::isfinite(next_norm))
      throw SolveError("Newton residual not finite", -1, next_norm);
    if (next_norm <= tol(w)) {
      // one polishing iteration when the residual sits between the
      // acceptance tolerance and the evaluation floor: the quadratic step
      // lands near machine level, so accepted-residual noise cannot
      // accumulate across steps or refinement ladders
      if (!at_floor(next_norm, w)) {
        const VectorXd polished = w - lu.solve(res);
        const VectorXd pres = g(polished);
        if (pres.cwiseAbs().maxCoeff() < next_norm) return polished;
      }
      return w;
    }
    if (next_norm > res_norm) {
      if (++growth_streak >= 3)
        throw SolveError("Newton iteration diverging", -1, next_norm);
    } else {
      growth_streak = 0;
    }
    if (next_norm > 0.5 * res_norm) have_lu = false;  // slow contraction
    res_norm = next_norm;
  }
  throw SolveError("Newton did not converge within max_iter", -1, res_norm);
}

StageBlock step(const PeerCoefficients& coeffs, const SplitProblem& problem,
                const StageBlock& block, const SolverConfig& config) {
  const int s = coeffs.s;
  if (static_cast<int>(block.stages.size()) != s)
    throw std::invalid_argument("stage count mismatch");
  require_config(config);
  require_stepper_nodes(coeffs, /*unit_interval=*/false);
  const double dt = block.dt;
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");

  const auto jac = jacobian_provider(problem, config);
  const MatrixXd vv = predictor_matrix(coeffs);

  // callers may supply blocks without derivative caches
  std::vector<VectorXd> f0_old, f1_old;
  const std::vector<VectorXd>* f0p = &block.f0_vals;
  const std::vector<VectorXd>* f1p = &block.f1_vals;
  if (block.f0_vals.size() != block.stages.size() ||
      block.f1_vals.size() != block.stages.size()) {
    for (const auto& wj : block.stages) {
      f0_old.push_back(problem.f0(wj));
      f1_old.push_back(problem.f1(wj));
    }
    f0p = &f0_old;
    f1p = &f1_old;
  }

  StageBlock next;
  next.t_n = block.t_n + dt;
  next.dt = dt;
  next.stages.reserve(s);
  next.f0_vals.reserve(s);
  next.f1_vals.reserve(s);

  for (int i = 0; i < s; ++i) {
    VectorXd rhs = VectorXd::Zero(problem.dim);
    for (int j = 0; j < s; ++j) {
      rhs += coeffs.P(i, j) * block.stages[j];
      rhs += dt * coeffs.Qhat(i, j) * (*f0p)[j];
      rhs += dt * coeffs.Q(i, j) * (*f1p)[j];
    }
    for (int j = 0; j < i; ++j) {
      rhs += dt * coeffs.Rhat(i, j) * next.f0_vals[j];
      rhs += dt * coeffs.R(i, j) * next.f1_vals[j];
    }

    VectorXd guess = VectorXd::Zero(problem.dim);
    for (int j = 0; j < s; ++j) guess += vv(i, j) * block.stages[j];
    if (!guess.allFinite()) guess = block.stages[s - 1];

    const double dt_gamma = dt * coeffs.gamma;
    auto g = [&](const VectorXd& w) -> VectorXd {
      return w - rhs - dt_gamma * problem.f1(w);
    };
    VectorXd w;
    try {
      w = newton_solve_stage(g, guess, jac, dt_gamma, config);
    } catch (const SolveError& e) {
      throw SolveError(std::string("stage ") + std::to_string(i + 1) + ": " +
                           e.what(),
                       i, e.last_residual());
    }
    next.stages.push_back(w);
    next.f0_vals.push_back(problem.f0(w));
    next.f1_vals.push_back(problem.f1(w));
  }
  return next;
}

namespace {

// Implicit part of one IMEX-Euler substep, solved to a state tolerance far
// below the refinement target.  Termination is on the Newton update size,
// not the residual: for stiff f1 the residual floor grows like h/eps while
// the update still measures actual state movement.
VectorXd tight_substep_solve(const SplitProblem& problem,
                             const std::function<MatrixXd(const VectorXd&)>& jac,
                             const VectorXd& rhs, double h, double update_tol) {
  VectorXd w = rhs;
  const auto m = w.size();
  double last = 0.0;
  for (int it = 0; it < 30; ++it) {
    Eigen::FullPivLU<MatrixXd> lu(MatrixXd::Identity(m, m) - h * jac(w));
    lu.setThreshold(1e-13);
    if (!lu.isInvertible())
      throw SolveError("singular matrix in starting substep", -1, last);
    const VectorXd dw = lu.solve(w - rhs - h * problem.f1(w));
    w -= dw;
    last = dw.cwiseAbs().maxCoeff();
    if (last <= update_tol * (1.0 + w.cwiseAbs().maxCoeff())) return w;
  }
  throw SolveError("starting substep solve stalled", -1, last);
}

// K substeps of IMEX Euler over [0, t_target] from u0
VectorXd imex_euler(const SplitProblem& problem,
                    const std::function<MatrixXd(const VectorXd&)>& jac,
                    const VectorXd& u0, double t_target, int substeps,
                    const SolverConfig& config) {
  const double h = t_target / substeps;
  // K-fold accumulation of per-substep acceptance error must stay below
  // the tableau stopping tolerance
  const double update_tol =
      std::max(config.starting_tol / (16.0 * substeps),
               8.0 * std::numeric_limits<double>::epsilon());
  VectorXd u = u0;
  for (int k = 0; k < substeps; ++k) {
    const VectorXd rhs = u + h * problem.f0(u);
    u = tight_substep_solve(problem, jac, rhs, h, update_tol);
  }
  return u;
}

// refined stage value at time t_target via the Richardson tableau over the
// substep-doubling ladder
VectorXd refined_start_value(const SplitProblem& problem,
                             const std::function<MatrixXd(const VectorXd&)>& jac,
                             const VectorXd& u0, double t_target,
                             const SolverConfig& config) {
  constexpr int kMaxDoublings = 12;
  constexpr int kTableDepth = 4;
  std::vector<std::vector<VectorXd>> rows;
  VectorXd prev_diag;
  double last_gap = 0.0;
  int substeps = config.starting_substeps_initial;
  for (int j = 0; j <= kMaxDoublings; ++j) {
    std::vector<VectorXd> row;
    row.push_back(imex_euler(problem, jac, u0, t_target, substeps, config));
    const int depth = std::min(j, kTableDepth);
    for (int q = 1; q <= depth; ++q) {
      const double f = std::pow(2.0, q);
      row.push_back((f * row[q - 1] - rows[j - 1][q - 1]) / (f - 1.0));
    }
    const VectorXd diag = row.back();
    if (j > 0) {
      last_gap = scaled_diff(diag, prev_diag);
      if (last_gap <= config.starting_tol) return diag;
    }
    prev_diag = diag;
    rows.push_back(std::move(row));
    substeps *= 2;
  }
  throw SolveError("starting refinement did not converge within 12 doublings",
                   -1, last_gap);
}

}  // namespace

StageBlock initialize_stages(const PeerCoefficients& coeffs,
                             const SplitProblem& problem, const VectorXd& u0,
                             double dt, const SolverConfig& config) {
  require_config(config);
  require_stepper_nodes(coeffs, /*unit_interval=*/true);
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const auto jac = jacobian_provider(problem, config);

  StageBlock block;
  block.t_n = 0.0;
  block.dt = dt;
  for (int i = 0; i < coeffs.s; ++i) {
    const double ti = coeffs.c(i) * dt;
    VectorXd w;
    if (ti == 0.0)
      w = u0;
    else if (problem.exact)
      w = problem.exact(ti);
    else
      w = refined_start_value(problem, jac, u0, ti, config);
    block.stages.push_back(w);
    block.f0_vals.push_back(problem.f0(w));
    block.f1_vals.push_back(problem.f1(w));
  }
  return block;
}

Trajectory integrate(const PeerCoefficients& coeffs,
                     const SplitProblem& problem, const VectorXd& u0,
                     double t_end, double dt, const SolverConfig& config) {
  if (!(t_end > 0.0)) throw std::invalid_argument("t_end must exceed t_0");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double steps_real = t_end / dt;
  const long long n_steps = std::llround(steps_real);
  if (n_steps < 1 ||
      std::abs(n_steps * dt - t_end) > 1e-12 * std::max(1.0, std::abs(t_end)))
    throw std::invalid_argument(
        "dt must divide t_end (no partial final step)");

  Trajectory traj;
  traj.t.reserve(n_steps);
  traj.u.reserve(n_steps);

  StageBlock block;
  long long remaining;
  if (coeffs.s == 1) {
    // the degenerate one-stage starting block: the single stage (c_1 = 1)
    // anchored one step back sits exactly at t = 0 where u0 is exact
    block.t_n = -dt;
    block.dt = dt;
    block.stages.push_back(u0);
    block.f0_vals.push_back(problem.f0(u0));
    block.f1_vals.push_back(problem.f1(u0));
    remaining = n_steps;
  } else {
    block = initialize_stages(coeffs, problem, u0, dt, config);
    traj.t.push_back(dt);
    traj.u.push_back(block.stages.back());
    remaining = n_steps - 1;
  }

  for (long long k = 0; k < remaining; ++k) {
    try {
      block = step(coeffs, problem, block, config);
    } catch (const SolveError& e) {
      throw SolveError("step " + std::to_string(traj.t.size() + 1) + ": " +
                           e.what(),
                       e.stage_index(), e.last_residual());
    }
    // multiplication instead of accumulation keeps recorded times
    // byte-identical across refinement levels of the same horizon
    const auto idx = static_cast<long long>(traj.t.size()) + 1;
    block.t_n = static_cast<double>(idx - 1) * dt;
    traj.t.push_back(static_cast<double>(idx) * dt);
    traj.u.push_back(block.stages.back());
  }
  return traj;
}

}  // namespace peer
