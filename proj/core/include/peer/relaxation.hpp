#pragma once

#include "peer/stepper.hpp"

#include <cstdint>
#include <vector>

namespace peer {

// Stiff-source structure U' = F0(U) + (1/eps) G(U) with a conservation
// matrix C (M x N, M < N) satisfying C G(U) = 0 for all U, and a local
// equilibrium map E with G(E(u)) = 0 and C E(u) = u.
struct RelaxationStructure {
  int n_full = 0;
  int m_cons = 0;
  MatrixXd C;
  std::function<VectorXd(const VectorXd&)> source;           // G
  std::function<VectorXd(const VectorXd&)> equilibrium_map;  // E
};

// A split problem whose f1 equals source/epsilon, bundled with its structure.
struct RelaxationProblem {
  SplitProblem full;
  RelaxationStructure structure;
  double epsilon = 1.0;
};

struct StructureReport {
  double max_cg_defect = 0.0;  // max ||C G(U)||_inf over full-state samples
  double max_ge_defect = 0.0;  // max ||G(E(u))||_inf over conserved samples
  double max_ce_defect = 0.0;  // max ||C E(u) - u||_inf over conserved samples
  bool rank_ok = false;        // rank(C) == M with singular values > 1e-10
  bool passed(double tol = 1e-12) const {
    return rank_ok && max_cg_defect <= tol && max_ge_defect <= tol &&
           max_ce_defect <= tol;
  }
};

// Reproducible pseudo-random states with components in [-2, 2].
std::vector<VectorXd> sample_states(int dim, int count = 128,
                                    std::uint32_t seed = 12345);

// Spot-checks the algebraic identities of the structure on the given
// samples and the numerical rank of C.  Throws std::invalid_argument on
// empty samples or dimension mismatches.
StructureReport check_structure(const RelaxationStructure& structure,
                                const std::vector<VectorXd>& full_samples,
                                const std::vector<VectorXd>& conserved_samples);

// Formal limit problem: M-dimensional, f0(u) = C f0_full(E(u)), f1 == 0,
// treated fully explicitly.
SplitProblem limit_problem(const RelaxationProblem& rp);

// max over the trajectory of ||G(U_n)||_inf; O(epsilon) for well-prepared
// data as epsilon -> 0.
double equilibrium_residual(const RelaxationProblem& rp,
                            const Trajectory& trajectory);

// E(u_conserved), the canonical well-prepared full state (zero slack).
VectorXd well_prepared_data(const RelaxationProblem& rp,
                            const VectorXd& u_conserved);

}  // namespace peer
