#include "peer/relaxation.hpp"

#include <Eigen/SVD>

#include <random>

namespace peer {

std::vector<VectorXd> sample_states(int dim, int count, std::uint32_t seed) {
  if (dim < 1 || count < 1)
    throw std::invalid_argument("sample_states needs dim >= 1, count >= 1");
  std::mt19937 gen(seed);
  std::vector<VectorXd> states;
  states.reserve(count);
  for (int k = 0; k < count; ++k) {
    VectorXd x(dim);
    // explicit integer-to-double scaling keeps the stream platform-independent
    for (int i = 0; i < dim; ++i)
      x(i) = -2.0 + 4.0 * (static_cast<double>(gen()) / 4294967296.0);
    states.push_back(std::move(x));
  }
  return states;
}

StructureReport check_structure(
    const RelaxationStructure& structure,
    const std::vector<VectorXd>& full_samples,
    const std::vector<VectorXd>& conserved_samples) {
  const int n = structure.n_full;
  const int m = structure.m_cons;
  if (n < 1 || m < 1 || m >= n)
    throw std::invalid_argument("structure requires 0 < M < N");
  if (structure.C.rows() != m || structure.C.cols() != n)
    throw std::invalid_argument("C must be M x N");
  if (full_samples.empty() || conserved_samples.empty())
    throw std::invalid_argument("check_structure needs nonempty samples");

  StructureReport report;
  const Eigen::JacobiSVD<MatrixXd> svd(structure.C);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-10) ++rank;
  report.rank_ok = (rank == m);

  for (const VectorXd& u_full : full_samples) {
    if (u_full.size() != n)
      throw std::invalid_argument("full sample has wrong dimension");
    const VectorXd g = structure.source(u_full);
    if (g.size() != n) throw std::invalid_argument("source output dimension");
    report.max_cg_defect = std::max(
        report.max_cg_defect, (structure.C * g).cwiseAbs().maxCoeff());
  }
  for (const VectorXd& u : conserved_samples) {
    if (u.size() != m)
      throw std::invalid_argument("conserved sample has wrong dimension");
    const VectorXd full = structure.equilibrium_map(u);
    if (full.size() != n)
      throw std::invalid_argument("equilibrium_map output dimension");
    report.max_ge_defect = std::max(
        report.max_ge_defect, structure.source(full).cwiseAbs().maxCoeff());
    report.max_ce_defect =
        std::max(report.max_ce_defect,
                 (structure.C * full - u).cwiseAbs().maxCoeff());
  }
  return report;
}

SplitProblem limit_problem(const RelaxationProblem& rp) {
  const int m = rp.structure.m_cons;
  SplitProblem lp;
  lp.dim = m;
  lp.f0 = [C = rp.structure.C, E = rp.structure.equilibrium_map,
           f0 = rp.full.f0](const VectorXd& u) -> VectorXd {
    return C * f0(E(u));
  };
  lp.f1 = [m](const VectorXd&) -> VectorXd { return VectorXd::Zero(m); };
  lp.jac1 = [m](const VectorXd&) -> MatrixXd { return MatrixXd::Zero(m, m); };
  lp.label = rp.full.label + "-limit";
  if (rp.full.initial) lp.initial = rp.structure.C * (*rp.full.initial);
  return lp;
}

double equilibrium_residual(const RelaxationProblem& rp,
                            const Trajectory& trajectory) {
  double r = 0.0;
  for (const VectorXd& u : trajectory.u) {
    if (u.size() != rp.structure.n_full)
      throw std::invalid_argument("trajectory state has wrong dimension");
    r = std::max(r, rp.structure.source(u).cwiseAbs().maxCoeff());
  }
  return r;
}

VectorXd well_prepared_data(const RelaxationProblem& rp,
                            const VectorXd& u_conserved) {
  if (u_conserved.size() != rp.structure.m_cons)
    throw std::invalid_argument("conserved state has wrong dimension");
  return rp.structure.equilibrium_map(u_conserved);
}

}  // namespace peer
