#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "peer/coefficients.hpp"

#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

using namespace peer;

namespace {

PeerCoefficients backward_euler() {
  VectorXd c(1);
  c << 1.0;
  return construct_order_s(c, 1.0, MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 1));
}

// admissible random construction inputs: distinct nodes in [0,1] with c_s=1,
// gamma in (0,2], P = e e_s^T, strictly lower S2 with entries in [-1,1]
PeerCoefficients random_construction(std::mt19937& gen, int s) {
  auto unit = [&gen] { return gen() / 4294967296.0; };
  VectorXd c(s);
  for (int i = 0; i < s - 1; ++i) c(i) = (i + 0.2 + 0.6 * unit()) / s;
  c(s - 1) = 1.0;
  const double gamma = 0.05 + 1.95 * unit();
  MatrixXd p = MatrixXd::Zero(s, s);
  p.col(s - 1).setOnes();
  MatrixXd s2 = MatrixXd::Zero(s, s);
  for (int i = 1; i < s; ++i)
    for (int j = 0; j < i; ++j) s2(i, j) = -1.0 + 2.0 * unit();
  return construct_order_s(c, gamma, p, s2);
}

}  // namespace

TEST_CASE("vandermonde matrices at shifts 0 and 1") {
  VectorXd c(2);
  c << 0.0, 1.0;
  const MatrixXd v0 = vandermonde(c, 0.0);
  CHECK(v0(0, 0) == 1.0);
  CHECK(v0(0, 1) == 0.0);
  CHECK(v0(1, 0) == 1.0);
  CHECK(v0(1, 1) == 1.0);
  const MatrixXd v1 = vandermonde(c, 1.0);
  CHECK(v1(0, 0) == 1.0);
  CHECK(v1(0, 1) == -1.0);
  CHECK(v1(1, 0) == 1.0);
  CHECK(v1(1, 1) == 0.0);
}

TEST_CASE("extrapolation matrix from nodes") {
  SUBCASE("one stage is the identity") {
    VectorXd c(1);
    c << 1.0;
    const MatrixXd s1 = derive_s1(MatrixXd::Zero(1, 1), c);
    CHECK(s1(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("two nodes, zero S2: linear extrapolation weights") {
    VectorXd c(2);
    c << 0.0, 1.0;
    const MatrixXd s1 = derive_s1(MatrixXd::Zero(2, 2), c);
    // values at {-1, 0} extrapolated to {0, 1}
    CHECK(s1(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(s1(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s1(1, 0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(s1(1, 1) == doctest::Approx(2.0).epsilon(1e-14));
  }
  SUBCASE("rows of S1 + S2 sum to one for any strictly lower S2") {
    std::mt19937 gen(7);
    VectorXd c(3);
    c << 0.3, 0.6, 1.0;
    MatrixXd s2 = MatrixXd::Zero(3, 3);
    s2(1, 0) = 0.4;
    s2(2, 0) = -0.8;
    s2(2, 1) = 1.1;
    const MatrixXd s1 = derive_s1(s2, c);
    const VectorXd sums = (s1 + s2).rowwise().sum();
    for (int i = 0; i < 3; ++i)
      CHECK(sums(i) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("dimension mismatch") {
    VectorXd c(2);
    c << 0.5, 1.0;
    CHECK_THROWS_AS(derive_s1(MatrixXd::Zero(3, 3), c),
                    std::invalid_argument);
  }
}

TEST_CASE("one-stage construction recovers the theta family") {
  const auto be = backward_euler();
  CHECK(be.Q(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(be.Qhat(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(be.S1(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(be.Rhat(0, 0) == 0.0);

  VectorXd c(1);
  c << 1.0;
  const auto theta =
      construct_order_s(c, 0.6, MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 1));
  CHECK(theta.Q(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("polynomial exactness residuals") {
  const auto be = backward_euler();
  SUBCASE("degrees within the order are annihilated") {
    for (int deg = 0; deg <= 1; ++deg) {
      CHECK(residual_polynomial_exactness(be, deg,
                                          ExactnessMode::implicit_base)
                .cwiseAbs()
                .maxCoeff() <= 1e-15);
      CHECK(residual_polynomial_exactness(be, deg, ExactnessMode::imex_split)
                .cwiseAbs()
                .maxCoeff() <= 1e-15);
    }
  }
  SUBCASE("first unmatched degree has a hand-computed defect") {
    const VectorXd r =
        residual_polynomial_exactness(be, 2, ExactnessMode::implicit_base);
    CHECK(r.size() == 1);
    CHECK(r(0) == doctest::Approx(-1.0).epsilon(1e-15));
  }
}

TEST_CASE("bundled methods meet their design order") {
  for (int s = 1; s <= 4; ++s) {
    CAPTURE(s);
    const auto m = builtin_method(s);
    const auto rep = validate(m);
    CHECK(rep.passed);
    CHECK(rep.violations.empty());
    CHECK(rep.implicit_exactness_degree == s);
    CHECK(rep.extrapolation_exactness_degree == s - 1);
    for (int deg = 0; deg <= s; ++deg) {
      CHECK(residual_polynomial_exactness(m, deg,
                                          ExactnessMode::implicit_base)
                .cwiseAbs()
                .maxCoeff() <= 1e-12);
      CHECK(residual_polynomial_exactness(m, deg, ExactnessMode::imex_split)
                .cwiseAbs()
                .maxCoeff() <= 1e-11);
    }
    for (int deg = 0; deg <= s - 1; ++deg)
      CHECK(extrapolation_defect(m, deg) <= 1e-12);
    // default constructions are not superconvergent
    CHECK(residual_polynomial_exactness(m, s + 1, ExactnessMode::implicit_base)
              .cwiseAbs()
              .maxCoeff() > 1e-6);
    CHECK(((m.S1 + m.S2).rowwise().sum().array() - 1.0).abs().maxCoeff() <=
          1e-14);
  }
  CHECK_THROWS_AS(builtin_method(0), std::invalid_argument);
  CHECK_THROWS_AS(builtin_method(5), std::invalid_argument);
}

TEST_CASE("randomized admissible constructions validate and are exact") {
  std::mt19937 gen(42);
  for (int trial = 0; trial < 10; ++trial) {
    const int s = 2 + static_cast<int>(gen() % 3);
    CAPTURE(trial);
    CAPTURE(s);
    const auto m = random_construction(gen, s);
    const auto rep = validate(m);
    CHECK(rep.passed);
    CHECK(rep.implicit_exactness_degree >= s);
    CHECK(rep.extrapolation_exactness_degree >= s - 1);
  }
}

TEST_CASE("construction rejects inadmissible inputs") {
  VectorXd c(2);
  c << 0.5, 1.0;
  MatrixXd p = MatrixXd::Zero(2, 2);
  p.col(1).setOnes();
  const MatrixXd z = MatrixXd::Zero(2, 2);

  CHECK_THROWS_AS(construct_order_s(c, 0.0, p, z), std::invalid_argument);
  CHECK_THROWS_AS(construct_order_s(c, -0.3, p, z), std::invalid_argument);

  VectorXd outside(2);
  outside << -0.2, 1.0;
  CHECK_THROWS_AS(construct_order_s(outside, 0.5, p, z),
                  std::invalid_argument);

  VectorXd wrong_last(2);
  wrong_last << 0.3, 0.9;
  CHECK_THROWS_AS(construct_order_s(wrong_last, 0.5, p, z),
                  std::invalid_argument);

  MatrixXd bad_rows = p;
  bad_rows(0, 1) = 0.7;
  CHECK_THROWS_AS(construct_order_s(c, 0.5, bad_rows, z), ValidationError);

  MatrixXd unstable = MatrixXd::Zero(2, 2);
  unstable(0, 0) = 2.0;
  unstable(0, 1) = -1.0;
  unstable(1, 1) = 1.0;
  CHECK_THROWS_AS(construct_order_s(c, 0.5, unstable, z), ValidationError);

  MatrixXd s2_diag = z;
  s2_diag(0, 0) = 0.1;
  CHECK_THROWS_AS(construct_order_s(c, 0.5, p, s2_diag),
                  std::invalid_argument);
}

TEST_CASE("serialization round trip is lossless") {
  const auto m = builtin_method(3);
  const std::string text = serialize_coefficients(m);
  std::istringstream in(text);
  const auto back = parse_coefficients(in);
  CHECK(back.s == m.s);
  CHECK(back.gamma == m.gamma);
  CHECK((back.c - m.c).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.P - m.P).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.Q - m.Q).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.R - m.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.S2 - m.S2).cwiseAbs().maxCoeff() == 0.0);
  // derived matrices are rebuilt, not stored
  CHECK((back.S1 - m.S1).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((back.Qhat - m.Qhat).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((back.Rhat - m.Rhat).cwiseAbs().maxCoeff() <= 1e-14);

  const auto path =
      (std::filesystem::temp_directory_path() / "peer_roundtrip.txt").string();
  save_coefficients(m, path);
  const auto loaded = load_coefficients(path);
  CHECK((loaded.Q - m.Q).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("parser reports the offending line") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_coefficients(in);
  };
  const std::string good = serialize_coefficients(builtin_method(1));

  SUBCASE("bad header") {
    try {
      parse("peer-coefficients v2\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
  }
  SUBCASE("unknown key") {
    try {
      parse("peer-coefficients v1\ns 1\nbogus 3\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("missing key") {
    CHECK_THROWS_AS(parse("peer-coefficients v1\ns 1\ngamma 1\n"), ParseError);
  }
  SUBCASE("truncated matrix block") {
    const auto cut = good.substr(0, good.rfind("S2"));
    CHECK_THROWS_AS(parse(cut), ParseError);
  }
  SUBCASE("short matrix row") {
    std::string text = serialize_coefficients(builtin_method(2));
    const auto pos = text.find("P\n") + 2;
    const auto eol = text.find('\n', pos);
    text.replace(pos, eol - pos, "0.5");
    CHECK_THROWS_AS(parse(text), ParseError);
  }
  SUBCASE("trailing content") {
    CHECK_THROWS_AS(parse(good + "extra\n"), ParseError);
  }
}

TEST_CASE("loading structurally invalid coefficients fails validation") {
  auto reload = [](std::string text) {
    std::istringstream in(text);
    return parse_coefficients(in);
  };
  const std::string good = serialize_coefficients(builtin_method(2));

  SUBCASE("last node moved off 1") {
    std::string text = good;
    const auto pos = text.find("c 0.8");
    text.replace(text.find(" 1\n", pos), 3, " 0.9\n");
    try {
      reload(text);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(!e.report().passed);
      CHECK(e.report().summary().find("c_s = 1") != std::string::npos);
    }
  }
  SUBCASE("gamma inconsistent with the R diagonal") {
    std::string text = good;
    text.replace(text.find("gamma 0.27"), 10, "gamma 0.43");
    try {
      reload(text);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.report().summary().find("R diagonal") != std::string::npos);
    }
  }
}

TEST_CASE("validation flags tampered matrices") {
  auto m = builtin_method(2);
  SUBCASE("upper triangular R entry") {
    m.R(0, 1) = 0.2;
    const auto rep = validate(m);
    CHECK(!rep.passed);
    CHECK(rep.violations.size() >= 1);
  }
  SUBCASE("S2 diagonal entry") {
    m.S2(1, 1) = 0.1;
    CHECK(!validate(m).passed);
  }
  SUBCASE("broken P row sums") {
    m.P(0, 0) += 0.05;
    CHECK(!validate(m).passed);
  }
  SUBCASE("stale derived Qhat") {
    m.Qhat(0, 0) += 1e-6;
    CHECK(!validate(m).passed);
  }
}

TEST_CASE("amplification matrices and stability scan") {
  const auto be = backward_euler();
  SUBCASE("z = 0 reduces to the stage-transfer matrix") {
    const auto m0 = amplification_matrix(builtin_method(2),
                                         std::complex<double>(0.0, 0.0));
    CHECK((m0.real() - builtin_method(2).P).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(spectral_radius(m0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("scalar implicit Euler damping factor") {
    const auto m = amplification_matrix(be, std::complex<double>(-10.0, 0.0));
    CHECK(m(0, 0).real() == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
    CHECK(m(0, 0).imag() == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("imex variant with explicit part switched off") {
    const std::complex<double> z(-0.7, 0.4);
    const auto full = imex_amplification_matrix(builtin_method(3), {0.0, 0.0}, z);
    const auto impl = amplification_matrix(builtin_method(3), z);
    CHECK((full - impl).cwiseAbs().maxCoeff() <= 1e-13);
  }
  SUBCASE("scan marks the real pole and fills the rest") {
    StabilityGrid grid;
    grid.re_min = -2.0;
    grid.re_max = 1.0;
    grid.im_min = 0.0;
    grid.im_max = 0.0;
    grid.n_re = 4;  // z = -2, -1, 0, 1; pole of the gamma=1 method at z=1
    grid.n_im = 1;
    const auto field = stability_scan(be, grid);
    CHECK(field.rho.rows() == 1);
    CHECK(field.rho.cols() == 4);
    CHECK(std::isnan(field.rho(0, 3)));
    for (int j = 0; j < 3; ++j) {
      CHECK(std::isfinite(field.rho(0, j)));
      CHECK(field.rho(0, j) <= 1.0);
    }
  }
}
