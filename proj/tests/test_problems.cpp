#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "peer/problems.hpp"

#include <cmath>
#include <numbers>

using namespace peer;

TEST_CASE("oscillator with constant forcing: balance-law benchmark") {
  const auto p = wb_boscarino_pareschi();
  CHECK(p.dim == 2);
  CHECK(p.label == "wb");

  VectorXd u(2);
  u << 0.0, 1.0;
  CHECK(p.f0(u)(0) == 1.0);
  CHECK(p.f0(u)(1) == 0.0);
  CHECK(p.f1(u)(0) == 0.0);
  CHECK(p.f1(u)(1) == 0.0);

  REQUIRE(p.equilibrium.has_value());
  const VectorXd& star = *p.equilibrium;
  CHECK(star(0) == 1.0);
  CHECK(star(1) == 0.0);
  CHECK((p.f0(star) + p.f1(star)).cwiseAbs().maxCoeff() <= 1e-15);

  REQUIRE(p.initial.has_value());
  CHECK((*p.initial)(0) == 0.0);
  CHECK((*p.initial)(1) == 1.0);

  const MatrixXd j = p.jac1(u);
  CHECK(j(0, 0) == 0.0);
  CHECK(j(0, 1) == 0.0);
  CHECK(j(1, 0) == 0.0);
  CHECK(j(1, 1) == -1.0);
}

TEST_CASE("relaxation oscillator carries a conforming structure") {
  const auto rp = ap_pareschi_russo(0.5);
  CHECK(rp.epsilon == 0.5);
  CHECK(rp.full.label == "ap");
  CHECK(rp.structure.n_full == 2);
  CHECK(rp.structure.m_cons == 1);

  // f1 = G / epsilon
  VectorXd u(2);
  u << std::numbers::pi / 2.0, 0.0;
  CHECK(rp.full.f1(u)(1) == doctest::Approx(2.0).epsilon(1e-15));
  const auto samples = sample_states(2, 16, 77);
  for (const auto& v : samples)
    CHECK((rp.full.f1(v) - rp.structure.source(v) / rp.epsilon)
              .cwiseAbs()
              .maxCoeff() <= 1e-13);

  REQUIRE(rp.full.initial.has_value());
  CHECK((*rp.full.initial)(0) ==
        doctest::Approx(std::numbers::pi / 2.0).epsilon(1e-15));
  CHECK((*rp.full.initial)(1) == 1.0);
  // the bundled initial state is well-prepared
  CHECK(rp.structure.source(*rp.full.initial).cwiseAbs().maxCoeff() <= 1e-15);

  const auto rep =
      check_structure(rp.structure, sample_states(2), sample_states(1));
  CHECK(rep.passed());

  CHECK_THROWS_AS(ap_pareschi_russo(0.0), std::invalid_argument);
  CHECK_THROWS_AS(ap_pareschi_russo(-1.0), std::invalid_argument);
}

TEST_CASE("epsilon folded into the source leaves trajectories unchanged") {
  const double eps = 0.5;
  const auto a = ap_pareschi_russo(eps);

  // same system written at epsilon = 1 with the 1/eps absorbed into G
  auto b = ap_pareschi_russo(1.0);
  b.epsilon = 1.0;
  b.structure.source = [src = a.structure.source, eps](const VectorXd& u) {
    return (src(u) / eps).eval();
  };
  b.full.f1 = [src = b.structure.source](const VectorXd& u) {
    return (src(u) / 1.0).eval();
  };
  // d/du (G/eps) at eps' = 1 is exactly the original scaled Jacobian
  b.full.jac1 = a.full.jac1;

  const auto m = builtin_method(2);
  const VectorXd u0 = *a.full.initial;
  const auto ta = integrate(m, a.full, u0, 1.0, 0.05, {});
  const auto tb = integrate(m, b.full, u0, 1.0, 0.05, {});
  REQUIRE(ta.t.size() == tb.t.size());
  for (std::size_t k = 0; k < ta.t.size(); ++k)
    CHECK((ta.u[k] - tb.u[k]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("polynomial oracle problem") {
  SUBCASE("closed form and split are consistent") {
    const auto p = polynomial_exactness_problem(3, 0.4);
    CHECK(p.label == "poly3");
    const VectorXd at2 = p.exact(2.0);
    CHECK(at2(0) == 2.0);
    CHECK(at2(1) == 8.0);
    // f0 + f1 equals the time derivative of the exact solution
    VectorXd u(2);
    u << 2.0, 8.0;
    const VectorXd rate = p.f0(u) + p.f1(u);
    CHECK(rate(0) == 1.0);
    CHECK(rate(1) == doctest::Approx(12.0).epsilon(1e-15));  // d/dt t^3 at 2
  }
  SUBCASE("degree 0 keeps a constant solution") {
    const auto p = polynomial_exactness_problem(0, 0.9);
    const auto traj = integrate(builtin_method(2), p, *p.initial, 1.0, 0.25, {});
    for (const auto& u : traj.u) CHECK(std::abs(u(1) - 1.0) <= 1e-14);
  }
  SUBCASE("degree at the stage count integrates exactly") {
    for (int s : {2, 3}) {
      const auto p = polynomial_exactness_problem(s, 0.3);
      const auto traj =
          integrate(builtin_method(s), p, *p.initial, 1.0, 0.125, {});
      for (std::size_t k = 0; k < traj.t.size(); ++k) {
        const VectorXd want = p.exact(traj.t[k]);
        CHECK((traj.u[k] - want).cwiseAbs().maxCoeff() <= 1e-10);
      }
    }
  }
  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS(polynomial_exactness_problem(-1, 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(polynomial_exactness_problem(2, 1.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(polynomial_exactness_problem(2, -0.1),
                    std::invalid_argument);
  }
}

TEST_CASE("semi-discrete two-field relaxation system") {
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(jin_xin_demo(0.0, 16), std::invalid_argument);
    CHECK_THROWS_AS(jin_xin_demo(1e-2, 4), std::invalid_argument);
    // subcharacteristic condition a > b^2
    CHECK_THROWS_AS(jin_xin_demo(1e-2, 16, 1.5, 1.0), std::invalid_argument);
  }
  SUBCASE("shapes, labels, structure") {
    const auto rp = jin_xin_demo(1e-2, 16);
    CHECK(rp.full.label == "jinxin");
    CHECK(rp.structure.n_full == 32);
    CHECK(rp.structure.m_cons == 16);
    const auto rep = check_structure(rp.structure, sample_states(32),
                                     sample_states(16));
    CHECK(rep.passed());
  }
  SUBCASE("initial data is a well-prepared sine wave") {
    const auto rp = jin_xin_demo(1e-2, 16);
    REQUIRE(rp.full.initial.has_value());
    const VectorXd& u0 = *rp.full.initial;
    REQUIRE(u0.size() == 32);
    for (int i = 0; i < 16; ++i) {
      const double x = (i + 0.5) / 16.0;
      CHECK(u0(i) ==
            doctest::Approx(std::sin(2.0 * std::numbers::pi * x)).epsilon(1e-14));
      CHECK(u0(16 + i) == doctest::Approx(0.5 * u0(i)).epsilon(1e-14));
    }
    CHECK(rp.structure.source(u0).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("periodic fluxes telescope to zero") {
    const auto rp = jin_xin_demo(1e-2, 16);
    const auto states = sample_states(32, 4, 31415);
    for (const auto& v : states) {
      const VectorXd rate = rp.full.f0(v);
      double sum_u = 0.0, sum_v = 0.0;
      for (int i = 0; i < 16; ++i) {
        sum_u += rate(i);
        sum_v += rate(16 + i);
      }
      CHECK(std::abs(sum_u) <= 1e-11);
      CHECK(std::abs(sum_v) <= 1e-11);
    }
  }
  SUBCASE("derived limit flux conserves mass and fixes constants") {
    const auto rp = jin_xin_demo(1e-2, 16, 0.0, 1.0);
    const auto lim = limit_problem(rp);
    CHECK(lim.dim == 16);
    // constant states are steady regardless of the advection speed
    CHECK(lim.f0(VectorXd::Constant(16, 0.8)).cwiseAbs().maxCoeff() <= 1e-12);
    // total mass is conserved by the periodic fluxes
    const auto states = sample_states(16, 4, 99);
    for (const auto& v : states)
      CHECK(std::abs(lim.f0(v).sum()) <= 1e-11);
  }
}
