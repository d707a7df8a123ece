#include "peer/problems.hpp"

#include <cmath>
#include <numbers>

namespace peer {

namespace {

double pow_int(double x, int n) {
  double r = 1.0;
  for (int k = 0; k < n; ++k) r *= x;
  return r;
}

void self_check(const RelaxationProblem& rp) {
  const auto report =
      check_structure(rp.structure, sample_states(rp.structure.n_full),
                      sample_states(rp.structure.m_cons));
  if (!report.passed())
    throw std::logic_error(rp.full.label + ": structure self-check failed");
}

}  // namespace

SplitProblem wb_boscarino_pareschi() {
  SplitProblem p;
  p.dim = 2;
  p.f0 = [](const VectorXd& u) -> VectorXd {
    return VectorXd{{u(1), -u(0)}};
  };
  p.f1 = [](const VectorXd& u) -> VectorXd {
    return VectorXd{{0.0, 1.0 - u(1)}};
  };
  p.jac1 = [](const VectorXd&) -> MatrixXd {
    return MatrixXd{{0.0, 0.0}, {0.0, -1.0}};
  };
  p.equilibrium = VectorXd{{1.0, 0.0}};
  p.initial = VectorXd{{0.0, 1.0}};
  p.label = "wb";
  if ((p.f0(*p.equilibrium) + p.f1(*p.equilibrium)).cwiseAbs().maxCoeff() >
      1e-13 * 2.0)
    throw std::logic_error("wb: equilibrium self-check failed");
  return p;
}

RelaxationProblem ap_pareschi_russo(double epsilon) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("ap_pareschi_russo requires epsilon > 0");
  RelaxationProblem rp;
  rp.epsilon = epsilon;
  rp.structure.n_full = 2;
  rp.structure.m_cons = 1;
  rp.structure.C = MatrixXd{{1.0, 0.0}};
  rp.structure.source = [](const VectorXd& u) -> VectorXd {
    return VectorXd{{0.0, std::sin(u(0)) - u(1)}};
  };
  rp.structure.equilibrium_map = [](const VectorXd& u) -> VectorXd {
    return VectorXd{{u(0), std::sin(u(0))}};
  };
  rp.full.dim = 2;
  rp.full.f0 = [](const VectorXd& u) -> VectorXd {
    return VectorXd{{-u(1), u(0)}};
  };
  rp.full.f1 = [G = rp.structure.source,
                epsilon](const VectorXd& u) -> VectorXd {
    return G(u) / epsilon;
  };
  rp.full.jac1 = [epsilon](const VectorXd& u) -> MatrixXd {
    const MatrixXd j{{0.0, 0.0}, {std::cos(u(0)), -1.0}};
    return j / epsilon;
  };
  rp.full.initial = VectorXd{{std::numbers::pi / 2.0, 1.0}};
  rp.full.label = "ap";
  self_check(rp);
  return rp;
}

SplitProblem polynomial_exactness_problem(int degree, double alpha) {
  if (degree < 0) throw std::invalid_argument("degree must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in [0,1]");
  auto q = [degree](double tau) {
    return degree == 0 ? 0.0 : degree * pow_int(tau, degree - 1);
  };
  auto dq = [degree](double tau) {
    return degree <= 1 ? 0.0
                       : double(degree) * (degree - 1) * pow_int(tau, degree - 2);
  };
  SplitProblem p;
  p.dim = 2;
  p.f0 = [q, alpha](const VectorXd& u) -> VectorXd {
    return VectorXd{{1.0, alpha * q(u(0))}};
  };
  p.f1 = [q, alpha](const VectorXd& u) -> VectorXd {
    return VectorXd{{0.0, (1.0 - alpha) * q(u(0))}};
  };
  p.jac1 = [dq, alpha](const VectorXd& u) -> MatrixXd {
    return MatrixXd{{0.0, 0.0}, {(1.0 - alpha) * dq(u(0)), 0.0}};
  };
  p.exact = [degree](double t) -> VectorXd {
    return VectorXd{{t, pow_int(t, degree)}};
  };
  p.initial = p.exact(0.0);
  p.label = "poly" + std::to_string(degree);
  return p;
}

RelaxationProblem jin_xin_demo(double epsilon, int cells, double b, double a) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("jin_xin_demo requires epsilon > 0");
  if (cells < 8) throw std::invalid_argument("jin_xin_demo requires cells >= 8");
  if (!(a > b * b))
    throw std::invalid_argument(
        "jin_xin_demo requires a > b^2 (subcharacteristic condition)");

  const int n = cells;
  const double dx = 1.0 / n;
  const double sa = std::sqrt(a);

  RelaxationProblem rp;
  rp.epsilon = epsilon;
  rp.structure.n_full = 2 * n;
  rp.structure.m_cons = n;
  rp.structure.C = MatrixXd::Zero(n, 2 * n);
  for (int i = 0; i < n; ++i) rp.structure.C(i, i) = 1.0;
  rp.structure.source = [n, b](const VectorXd& U) -> VectorXd {
    VectorXd g = VectorXd::Zero(2 * n);
    g.tail(n) = b * U.head(n) - U.tail(n);
    return g;
  };
  rp.structure.equilibrium_map = [n, b](const VectorXd& u) -> VectorXd {
    VectorXd full(2 * n);
    full.head(n) = u;
    full.tail(n) = b * u;
    return full;
  };

  // upwinding along the characteristic fields v ± sqrt(a) u, which travel
  // at speeds ± sqrt(a)
  rp.full.dim = 2 * n;
  rp.full.f0 = [n, a, sa, dx](const VectorXd& U) -> VectorXd {
    VectorXd out(2 * n);
    for (int i = 0; i < n; ++i) {
      const int im = (i + n - 1) % n;
      const int ip = (i + 1) % n;
      const double dwp =
          (U(n + i) + sa * U(i) - U(n + im) - sa * U(im)) / dx;
      const double dwm =
          (U(n + ip) - sa * U(ip) - U(n + i) + sa * U(i)) / dx;
      const double vx = 0.5 * (dwp + dwm);
      const double ux = 0.5 * (dwp - dwm) / sa;
      out(i) = -vx;
      out(n + i) = -a * ux;
    }
    return out;
  };
  rp.full.f1 = [G = rp.structure.source,
                epsilon](const VectorXd& U) -> VectorXd {
    return G(U) / epsilon;
  };
  MatrixXd jac = MatrixXd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    jac(n + i, i) = b / epsilon;
    jac(n + i, n + i) = -1.0 / epsilon;
  }
  rp.full.jac1 = [jac](const VectorXd&) -> MatrixXd { return jac; };

  VectorXd init(2 * n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) * dx;
    init(i) = std::sin(2.0 * std::numbers::pi * x);
    init(n + i) = b * init(i);
  }
  rp.full.initial = std::move(init);
  rp.full.label = "jinxin";
  self_check(rp);
  return rp;
}

}  // namespace peer
