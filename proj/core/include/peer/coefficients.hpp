#pragma once

#include <Eigen/Dense>

#include <complex>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace peer {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Coefficient set of a two-step s-stage IMEX Peer method
//
//   w_{n+1} = P w_n + dt Qhat F0(w_n) + dt Rhat F0(w_{n+1})
//                   + dt Q    F1(w_n) + dt R    F1(w_{n+1})
//
// where R is lower triangular with constant diagonal gamma > 0, S2 is
// strictly lower triangular, and the extrapolation matrices satisfy
// S1 = (I - S2) V0 V1^{-1} and Qhat = Q + R S1, Rhat = R S2.  Stage i of
// the block anchored at t_n approximates u(t_n + c_i dt); nodes are
// pairwise distinct with c_s = 1.
struct PeerCoefficients {
  int s = 0;
  double gamma = 0.0;
  VectorXd c;
  MatrixXd P, Q, R, S1, S2;
  MatrixXd Qhat, Rhat;  // derived, cached at construction/load
};

struct ValidationReport {
  bool passed = true;
  // (invariant name, max absolute violation)
  std::vector<std::pair<std::string, double>> violations;
  // highest polynomial degree reproduced exactly by the implicit base
  // scheme, and by the S1/S2 stage extrapolation
  int implicit_exactness_degree = -1;
  int extrapolation_exactness_degree = -1;

  std::string summary() const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

// Matrix with entry (i,j) = (c_i - shift)^(j-1); shift 0 gives V0, shift 1
// gives V1.  Invertible whenever the nodes are pairwise distinct.
MatrixXd vandermonde(const VectorXd& c, double shift);

// S1 = (I - S2) V0 V1^{-1}; rows of S1 + S2 each sum to 1.
MatrixXd derive_s1(const MatrixXd& S2, const VectorXd& c);

// Builds R = gamma I + R_lower and solves, independently for each row i of
// Q, the s linear conditions that make the implicit base scheme
// w_{n+1} = P w_n + dt Q F(w_n) + dt R F(w_{n+1}) reproduce the monomials
// t^k, k = 1..s, exactly (in normalized units t_n = 0, dt = 1):
//
//   (1+c_i)^k = sum_j P_ij c_j^k
//             + k (sum_j Q_ij c_j^{k-1} + sum_j R_ij (1+c_j)^{k-1}).
//
// S1, Qhat, Rhat are then derived.  Requires Pe = e, spectral radius of P
// at most 1 with semisimple unit-modulus eigenvalues, and c_i in [0,1].
PeerCoefficients construct_order_s(
    const VectorXd& c, double gamma, const MatrixXd& P, const MatrixXd& S2,
    const std::optional<MatrixXd>& R_lower = std::nullopt);

enum class ExactnessMode {
  implicit_base,  // w_{n+1} = P w_n + dt Q u' + dt R u'
  imex_split,     // full scheme under the fixed split u' = a u' + (1-a) u',
                  // a = 0.3, F0 extrapolated through Qhat/Rhat
};

// Per-stage defect when the exact monomial u(t) = t^degree is inserted into
// the scheme at the correct stage times (normalized t_n = 0, dt = 1).
VectorXd residual_polynomial_exactness(const PeerCoefficients& coeffs,
                                       int degree, ExactnessMode mode);

// Max-norm defect of the stage extrapolation identity
// S1 p(c - e) + S2 p(c) = p(c) for p(t) = t^degree (elementwise powers).
double extrapolation_defect(const PeerCoefficients& coeffs, int degree);

// Checks every structural and algebraic invariant (value checks with
// tolerance 1e-12, shape checks exact) and probes exactness degrees until
// the residual exceeds 1e-8.
ValidationReport validate(const PeerCoefficients& coeffs);

// ---- stability diagnostics ----

struct StabilityGrid {
  double re_min = -4.0, re_max = 1.0;
  double im_min = -3.0, im_max = 3.0;
  int n_re = 51, n_im = 51;
};

// Spectral radii of M(z) = (I - zR)^{-1} (P + zQ) over the grid; entries at
// the real pole z = 1/gamma are marked NaN.
struct StabilityField {
  StabilityGrid grid;
  MatrixXd rho;  // n_im rows, n_re cols
};

StabilityField stability_scan(const PeerCoefficients& coeffs,
                              const StabilityGrid& grid);

Eigen::MatrixXcd amplification_matrix(const PeerCoefficients& coeffs,
                                      std::complex<double> z);

// IMEX pair variant M(z0, z1) = (I - z0 Rhat - z1 R)^{-1} (P + z0 Qhat + z1 Q)
// with z0 the explicit and z1 the implicit eigenvalue times dt.
Eigen::MatrixXcd imex_amplification_matrix(const PeerCoefficients& coeffs,
                                           std::complex<double> z0,
                                           std::complex<double> z1);

double spectral_radius(const Eigen::MatrixXcd& m);

// ---- serialization ----
//
// Line-oriented text format:
//   peer-coefficients v1
//   s <int>
//   gamma <decimal>
//   c <s decimals>
//   P        (followed by s lines of s decimals; likewise Q, R, S2)
// Decimals carry 17 significant digits; S1, Qhat, Rhat are always derived,
// never stored.  Unknown keys are parse errors.

std::string serialize_coefficients(const PeerCoefficients& coeffs);
void save_coefficients(const PeerCoefficients& coeffs,
                       const std::string& path);

// Parses, derives S1/Qhat/Rhat, and validates; throws ParseError or
// ValidationError.
PeerCoefficients parse_coefficients(std::istream& in);
PeerCoefficients load_coefficients(const std::string& path);

// Bundled stability-tuned method of order s, s in 1..4.
PeerCoefficients builtin_method(int s);

}  // namespace peer
