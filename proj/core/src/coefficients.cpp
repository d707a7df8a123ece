#include "peer/coefficients.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace peer {

namespace {

constexpr double kValueTol = 1e-12;
constexpr double kDegreeProbeCutoff = 1e-8;
constexpr int kDegreeProbeCap = 12;

double pow_int(double x, int k) {
  // exact for k = 0 (returns 1 even at x = 0)
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

void require_node_vector(const VectorXd& c) {
  const int s = static_cast<int>(c.size());
  if (s < 1) throw std::invalid_argument("node vector must be nonempty");
  for (int i = 0; i < s; ++i)
    for (int j = i + 1; j < s; ++j)
      if (std::abs(c(i) - c(j)) <= kValueTol)
        throw std::invalid_argument("nodes must be pairwise distinct");
}

}  // namespace

std::string ValidationReport::summary() const {
  std::ostringstream os;
  os << (passed ? "passed" : "FAILED")
     << "; implicit exactness degree " << implicit_exactness_degree
     << ", extrapolation exactness degree " << extrapolation_exactness_degree;
  for (const auto& [name, mag] : violations) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", mag);
    os << "\n  violated: " << name << " (max defect " << buf << ")";
  }
  return os.str();
}

ValidationError::ValidationError(ValidationReport report)
    : std::runtime_error("coefficient validation failed: " + report.summary()),
      report_(std::move(report)) {}

MatrixXd vandermonde(const VectorXd& c, double shift) {
  require_node_vector(c);
  const int s = static_cast<int>(c.size());
  MatrixXd v(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) v(i, j) = pow_int(c(i) - shift, j);
  return v;
}

MatrixXd derive_s1(const MatrixXd& S2, const VectorXd& c) {
  const int s = static_cast<int>(c.size());
  if (S2.rows() != s || S2.cols() != s)
    throw std::invalid_argument("S2 dimension mismatch");
  const MatrixXd v0 = vandermonde(c, 0.0);
  const MatrixXd v1 = vandermonde(c, 1.0);
  // X = V0 V1^{-1} via V1^T X^T = V0^T
  Eigen::PartialPivLU<MatrixXd> lu(v1.transpose());
  const MatrixXd x = lu.solve(v0.transpose()).transpose();
  const double resid = (x * v1 - v0).cwiseAbs().maxCoeff();
  if (resid > 1e-10)
    throw std::runtime_error(
        "extrapolation solve poorly conditioned (residual " +
        std::to_string(resid) + ")");
  return (MatrixXd::Identity(s, s) - S2) * x;
}

PeerCoefficients construct_order_s(const VectorXd& c, double gamma,
                                   const MatrixXd& P, const MatrixXd& S2,
                                   const std::optional<MatrixXd>& R_lower) {
  require_node_vector(c);
  const int s = static_cast<int>(c.size());
  if (std::abs(c(s - 1) - 1.0) > kValueTol)
    throw std::invalid_argument("last node must equal 1");
  if (gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
  if (P.rows() != s || P.cols() != s || S2.rows() != s || S2.cols() != s)
    throw std::invalid_argument("matrix dimension mismatch");
  for (int i = 0; i < s; ++i)
    if (c(i) < -kValueTol || c(i) > 1.0 + kValueTol)
      throw std::invalid_argument("constructed methods require nodes in [0,1]");

  const VectorXd row_sums = P.rowwise().sum();
  if ((row_sums.array() - 1.0).abs().maxCoeff() > kValueTol) {
    ValidationReport rep;
    rep.passed = false;
    rep.violations.emplace_back("Pe = e",
                                (row_sums.array() - 1.0).abs().maxCoeff());
    throw ValidationError(std::move(rep));
  }
  // zero-stability: spectral radius of P at most 1, unit-modulus eigenvalues
  // semisimple
  {
    Eigen::ComplexEigenSolver<MatrixXd> es(P, /*computeEigenvectors=*/false);
    const auto& ev = es.eigenvalues();
    for (int i = 0; i < s; ++i) {
      const double mod = std::abs(ev(i));
      if (mod > 1.0 + 1e-10) {
        ValidationReport rep;
        rep.passed = false;
        rep.violations.emplace_back("spectral radius of P <= 1", mod - 1.0);
        throw ValidationError(std::move(rep));
      }
      if (mod > 1.0 - 1e-10) {
        int algebraic = 0;
        for (int j = 0; j < s; ++j)
          if (std::abs(ev(j) - ev(i)) < 1e-8) ++algebraic;
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(
            P.cast<std::complex<double>>() -
            ev(i) * Eigen::MatrixXcd::Identity(s, s));
        lu.setThreshold(1e-10);
        const int geometric = s - static_cast<int>(lu.rank());
        if (geometric < algebraic) {
          ValidationReport rep;
          rep.passed = false;
          rep.violations.emplace_back("unit eigenvalues of P semisimple",
                                      double(algebraic - geometric));
          throw ValidationError(std::move(rep));
        }
      }
    }
  }
  for (int i = 0; i < s; ++i)
    for (int j = i; j < s; ++j)
      if (S2(i, j) != 0.0)
        throw std::invalid_argument("S2 must be strictly lower triangular");

  PeerCoefficients m;
  m.s = s;
  m.gamma = gamma;
  m.c = c;
  m.P = P;
  m.S2 = S2;
  m.R = gamma * MatrixXd::Identity(s, s);
  if (R_lower) {
    if (R_lower->rows() != s || R_lower->cols() != s)
      throw std::invalid_argument("R_lower dimension mismatch");
    for (int i = 0; i < s; ++i)
      for (int j = i; j < s; ++j)
        if ((*R_lower)(i, j) != 0.0)
          throw std::invalid_argument(
              "R_lower must be strictly lower triangular");
    m.R += *R_lower;
  }

  // One coefficient matrix serves every row of Q: A(k-1, j) = k c_j^{k-1}.
  MatrixXd a(s, s), b(s, s);
  for (int k = 1; k <= s; ++k)
    for (int j = 0; j < s; ++j) a(k - 1, j) = k * pow_int(c(j), k - 1);
  for (int k = 1; k <= s; ++k)
    for (int i = 0; i < s; ++i) {
      double rhs = pow_int(1.0 + c(i), k);
      for (int j = 0; j < s; ++j) rhs -= m.P(i, j) * pow_int(c(j), k);
      for (int j = 0; j < s; ++j)
        rhs -= k * m.R(i, j) * pow_int(1.0 + c(j), k - 1);
      b(k - 1, i) = rhs;
    }
  Eigen::PartialPivLU<MatrixXd> lu(a);
  m.Q = lu.solve(b).transpose();

  m.S1 = derive_s1(m.S2, m.c);
  m.Qhat = m.Q + m.R * m.S1;
  m.Rhat = m.R * m.S2;
  return m;
}

VectorXd residual_polynomial_exactness(const PeerCoefficients& coeffs,
                                       int degree, ExactnessMode mode) {
  if (degree < 0) throw std::invalid_argument("degree must be nonnegative");
  const int s = coeffs.s;
  const VectorXd& c = coeffs.c;
  VectorXd old_val(s), new_val(s), old_der(s), new_der(s);
  for (int j = 0; j < s; ++j) {
    old_val(j) = pow_int(c(j), degree);
    new_val(j) = pow_int(1.0 + c(j), degree);
    old_der(j) = degree == 0 ? 0.0 : degree * pow_int(c(j), degree - 1);
    new_der(j) = degree == 0 ? 0.0 : degree * pow_int(1.0 + c(j), degree - 1);
  }
  VectorXd r;
  if (mode == ExactnessMode::implicit_base) {
    r = new_val - coeffs.P * old_val - coeffs.Q * old_der - coeffs.R * new_der;
  } else {
    const double alpha = 0.3;  // arbitrary fixed split; result must not
                               // depend on it for degrees within order
    r = new_val - coeffs.P * old_val -
        alpha * (coeffs.Qhat * old_der + coeffs.Rhat * new_der) -
        (1.0 - alpha) * (coeffs.Q * old_der + coeffs.R * new_der);
  }
  return r;
}

double extrapolation_defect(const PeerCoefficients& coeffs, int degree) {
  const int s = coeffs.s;
  VectorXd p_old(s), p_new(s);
  for (int j = 0; j < s; ++j) {
    p_old(j) = pow_int(coeffs.c(j) - 1.0, degree);
    p_new(j) = pow_int(coeffs.c(j), degree);
  }
  return (coeffs.S1 * p_old + coeffs.S2 * p_new - p_new)
      .cwiseAbs()
      .maxCoeff();
}

ValidationReport validate(const PeerCoefficients& coeffs) {
  ValidationReport rep;
  auto check = [&rep](const std::string& name, double defect, double tol) {
    if (!(defect <= tol)) {  // catches NaN as well
      rep.passed = false;
      rep.violations.emplace_back(name, defect);
    }
  };

  const int s = coeffs.s;
  if (s < 1 || coeffs.c.size() != s || coeffs.P.rows() != s ||
      coeffs.P.cols() != s || coeffs.Q.rows() != s || coeffs.Q.cols() != s ||
      coeffs.R.rows() != s || coeffs.R.cols() != s || coeffs.S1.rows() != s ||
      coeffs.S1.cols() != s || coeffs.S2.rows() != s ||
      coeffs.S2.cols() != s || coeffs.Qhat.rows() != s ||
      coeffs.Qhat.cols() != s || coeffs.Rhat.rows() != s ||
      coeffs.Rhat.cols() != s) {
    rep.passed = false;
    rep.violations.emplace_back("consistent dimensions", 1.0);
    return rep;
  }

  check("gamma > 0", coeffs.gamma > 0.0 ? 0.0 : 1.0, 0.5);

  double min_sep = std::numeric_limits<double>::infinity();
  for (int i = 0; i < s; ++i)
    for (int j = i + 1; j < s; ++j)
      min_sep = std::min(min_sep, std::abs(coeffs.c(i) - coeffs.c(j)));
  if (s > 1) check("nodes pairwise distinct", min_sep > kValueTol ? 0.0 : 1.0, 0.5);
  check("c_s = 1", std::abs(coeffs.c(s - 1) - 1.0), kValueTol);

  double upper_r = 0.0, diag_r = 0.0;
  for (int i = 0; i < s; ++i) {
    diag_r = std::max(diag_r, std::abs(coeffs.R(i, i) - coeffs.gamma));
    for (int j = i + 1; j < s; ++j)
      upper_r = std::max(upper_r, std::abs(coeffs.R(i, j)));
  }
  check("R lower triangular", upper_r, 0.0);
  check("R diagonal equals gamma", diag_r, kValueTol);

  double s2_upper = 0.0;
  for (int i = 0; i < s; ++i)
    for (int j = i; j < s; ++j)
      s2_upper = std::max(s2_upper, std::abs(coeffs.S2(i, j)));
  check("S2 strictly lower triangular", s2_upper, 0.0);

  check("Pe = e",
        (coeffs.P.rowwise().sum().array() - 1.0).abs().maxCoeff(), kValueTol);

  if (min_sep > kValueTol) {
    const MatrixXd s1_ref = derive_s1(coeffs.S2, coeffs.c);
    check("S1 = (I - S2) V0 V1^{-1}",
          (coeffs.S1 - s1_ref).cwiseAbs().maxCoeff(), kValueTol);
  }
  check("Qhat = Q + R S1",
        (coeffs.Qhat - (coeffs.Q + coeffs.R * coeffs.S1)).cwiseAbs().maxCoeff(),
        kValueTol);
  check("Rhat = R S2",
        (coeffs.Rhat - coeffs.R * coeffs.S2).cwiseAbs().maxCoeff(), kValueTol);
  check("(S1 + S2) e = e",
        ((coeffs.S1 + coeffs.S2).rowwise().sum().array() - 1.0)
            .abs()
            .maxCoeff(),
        1e-12);

  if (rep.passed) {
    int deg = 0;
    while (deg <= kDegreeProbeCap &&
           residual_polynomial_exactness(coeffs, deg,
                                         ExactnessMode::implicit_base)
                   .cwiseAbs()
                   .maxCoeff() <= kDegreeProbeCutoff)
      ++deg;
    rep.implicit_exactness_degree = deg - 1;

    deg = 0;
    while (deg <= kDegreeProbeCap &&
           extrapolation_defect(coeffs, deg) <= kDegreeProbeCutoff)
      ++deg;
    rep.extrapolation_exactness_degree = deg - 1;
  }
  return rep;
}

Eigen::MatrixXcd amplification_matrix(const PeerCoefficients& coeffs,
                                      std::complex<double> z) {
  const int s = coeffs.s;
  const Eigen::MatrixXcd lhs =
      Eigen::MatrixXcd::Identity(s, s) - z * coeffs.R.cast<std::complex<double>>();
  const Eigen::MatrixXcd rhs =
      coeffs.P.cast<std::complex<double>>() +
      z * coeffs.Q.cast<std::complex<double>>();
  return lhs.partialPivLu().solve(rhs);
}

Eigen::MatrixXcd imex_amplification_matrix(const PeerCoefficients& coeffs,
                                           std::complex<double> z0,
                                           std::complex<double> z1) {
  const int s = coeffs.s;
  const Eigen::MatrixXcd lhs =
      Eigen::MatrixXcd::Identity(s, s) -
      z0 * coeffs.Rhat.cast<std::complex<double>>() -
      z1 * coeffs.R.cast<std::complex<double>>();
  const Eigen::MatrixXcd rhs =
      coeffs.P.cast<std::complex<double>>() +
      z0 * coeffs.Qhat.cast<std::complex<double>>() +
      z1 * coeffs.Q.cast<std::complex<double>>();
  return lhs.partialPivLu().solve(rhs);
}

double spectral_radius(const Eigen::MatrixXcd& m) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m,
                                                 /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

StabilityField stability_scan(const PeerCoefficients& coeffs,
                              const StabilityGrid& grid) {
  if (grid.n_re < 1 || grid.n_im < 1)
    throw std::invalid_argument("stability grid must be nonempty");
  StabilityField field;
  field.grid = grid;
  field.rho.resize(grid.n_im, grid.n_re);
  const double pole = 1.0 / coeffs.gamma;
  for (int iy = 0; iy < grid.n_im; ++iy) {
    const double im =
        grid.n_im == 1
            ? grid.im_min
            : grid.im_min + (grid.im_max - grid.im_min) * iy / (grid.n_im - 1);
    for (int ix = 0; ix < grid.n_re; ++ix) {
      const double re =
          grid.n_re == 1
              ? grid.re_min
              : grid.re_min +
                    (grid.re_max - grid.re_min) * ix / (grid.n_re - 1);
      const std::complex<double> z(re, im);
      if (std::abs(z - std::complex<double>(pole, 0.0)) < 1e-12) {
        field.rho(iy, ix) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      field.rho(iy, ix) = spectral_radius(amplification_matrix(coeffs, z));
    }
  }
  return field;
}

// ---- serialization ----

namespace {

void append_double(std::string& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

void append_matrix(std::string& out, const std::string& key,
                   const MatrixXd& m) {
  out += key;
  out += '\n';
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      append_double(out, m(i, j));
    }
    out += '\n';
  }
}

std::vector<double> parse_numbers(const std::string& line, int lineno) {
  std::istringstream is(line);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("invalid number '" + tok + "'", lineno);
    }
  }
  return out;
}

}  // namespace

std::string serialize_coefficients(const PeerCoefficients& coeffs) {
  std::string out = "peer-coefficients v1\n";
  out += "s " + std::to_string(coeffs.s) + "\n";
  out += "gamma ";
  append_double(out, coeffs.gamma);
  out += "\nc";
  for (int i = 0; i < coeffs.s; ++i) {
    out += ' ';
    append_double(out, coeffs.c(i));
  }
  out += '\n';
  append_matrix(out, "P", coeffs.P);
  append_matrix(out, "Q", coeffs.Q);
  append_matrix(out, "R", coeffs.R);
  append_matrix(out, "S2", coeffs.S2);
  return out;
}

void save_coefficients(const PeerCoefficients& coeffs,
                       const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << serialize_coefficients(coeffs);
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

PeerCoefficients parse_coefficients(std::istream& in) {
  PeerCoefficients m;
  int lineno = 0;
  std::string line;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };

  if (!next_line() || line != "peer-coefficients v1")
    throw ParseError("expected header 'peer-coefficients v1'", lineno ? lineno : 1);

  int s = -1;
  bool have_gamma = false, have_c = false;
  bool have_p = false, have_q = false, have_r = false, have_s2 = false;

  auto read_matrix = [&](MatrixXd& dst, const std::string& key) {
    if (s < 0) throw ParseError("matrix '" + key + "' before 's'", lineno);
    dst.resize(s, s);
    for (int i = 0; i < s; ++i) {
      if (!next_line())
        throw ParseError("unexpected end of file in matrix '" + key + "'",
                         lineno + 1);
      const auto row = parse_numbers(line, lineno);
      if (static_cast<int>(row.size()) != s)
        throw ParseError("matrix '" + key + "' row has " +
                             std::to_string(row.size()) + " entries, expected " +
                             std::to_string(s),
                         lineno);
      for (int j = 0; j < s; ++j) dst(i, j) = row[j];
    }
  };

  while (next_line()) {
    std::istringstream is(line);
    std::string key;
    is >> key;
    std::string rest;
    std::getline(is, rest);
    if (key == "s") {
      const auto vals = parse_numbers(rest, lineno);
      if (vals.size() != 1 || vals[0] != std::floor(vals[0]) || vals[0] < 1)
        throw ParseError("'s' expects one positive integer", lineno);
      s = static_cast<int>(vals[0]);
    } else if (key == "gamma") {
      const auto vals = parse_numbers(rest, lineno);
      if (vals.size() != 1) throw ParseError("'gamma' expects one value", lineno);
      m.gamma = vals[0];
      have_gamma = true;
    } else if (key == "c") {
      if (s < 0) throw ParseError("'c' before 's'", lineno);
      const auto vals = parse_numbers(rest, lineno);
      if (static_cast<int>(vals.size()) != s)
        throw ParseError("'c' has " + std::to_string(vals.size()) +
                             " nodes, expected " + std::to_string(s),
                         lineno);
      m.c = Eigen::Map<const VectorXd>(vals.data(), s);
      have_c = true;
    } else if (key == "P" || key == "Q" || key == "R" || key == "S2") {
      if (rest.find_first_not_of(" \t") != std::string::npos)
        throw ParseError("unexpected content after '" + key + "'", lineno);
      if (key == "P") {
        read_matrix(m.P, "P");
        have_p = true;
      } else if (key == "Q") {
        read_matrix(m.Q, "Q");
        have_q = true;
      } else if (key == "R") {
        read_matrix(m.R, "R");
        have_r = true;
      } else {
        read_matrix(m.S2, "S2");
        have_s2 = true;
      }
    } else {
      throw ParseError("unknown key '" + key + "'", lineno);
    }
  }

  if (s < 0) throw ParseError("missing 's'", lineno + 1);
  if (!have_gamma) throw ParseError("missing 'gamma'", lineno + 1);
  if (!have_c) throw ParseError("missing 'c'", lineno + 1);
  if (!have_p || !have_q || !have_r || !have_s2)
    throw ParseError("missing matrix block (need P, Q, R, S2)", lineno + 1);

  m.s = s;
  m.S1 = derive_s1(m.S2, m.c);
  m.Qhat = m.Q + m.R * m.S1;
  m.Rhat = m.R * m.S2;

  ValidationReport rep = validate(m);
  if (!rep.passed) throw ValidationError(std::move(rep));
  return m;
}

PeerCoefficients load_coefficients(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return parse_coefficients(f);
}

PeerCoefficients builtin_method(int s) {
  // Stability-tuned parameter sets.  Each was selected by direct search so
  // that the implicit amplification M(z) stays contractive on the whole
  // negative real axis, the stiff-limit matrix R^{-1}Q has spectral radius
  // below one, and the coupled oscillator-plus-damping iteration used in the
  // steady-state tests is stable at dt = 1; convergence order s was then
  // confirmed empirically on stiff and nonstiff runs.
  auto rows = [](int n, std::initializer_list<double> row) {
    MatrixXd p(n, n);
    int j = 0;
    for (double v : row) p.col(j++).setConstant(v);
    return p;
  };
  auto strict_lower = [](int n, std::initializer_list<double> vals) {
    MatrixXd l = MatrixXd::Zero(n, n);
    auto it = vals.begin();
    for (int i = 1; i < n; ++i)
      for (int j = 0; j < i; ++j) l(i, j) = *it++;
    return l;
  };

  switch (s) {
    case 1: {
      VectorXd c(1);
      c << 1.0;
      return construct_order_s(c, 1.0, MatrixXd::Ones(1, 1),
                               MatrixXd::Zero(1, 1));
    }
    case 2: {
      VectorXd c(2);
      c << 0.8, 1.0;
      return construct_order_s(c, 0.27, rows(2, {0.35, 0.65}),
                               strict_lower(2, {0.72}),
                               strict_lower(2, {0.14}));
    }
    case 3: {
      VectorXd c(3);
      c << 0.2, 0.75, 1.0;
      return construct_order_s(c, 0.30, rows(3, {0.0, 0.0, 1.0}),
                               strict_lower(3, {-0.07, 0.70, 0.64}),
                               strict_lower(3, {0.85, 0.94, 0.15}));
    }
    case 4: {
      VectorXd c(4);
      c << 0.17, 0.28, 0.73, 1.0;
      return construct_order_s(
          c, 0.84, rows(4, {0.03, -0.11, -0.20, 1.28}),
          strict_lower(4, {0.11, 0.34, -0.43, 0.00, -0.39, 0.23}),
          strict_lower(4, {-0.75, -0.03, -0.33, 0.19, 0.71, -0.15}));
    }
    default:
      throw std::invalid_argument("builtin methods cover s = 1..4");
  }
}

}  // namespace peer
