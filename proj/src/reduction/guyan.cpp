#include "siva/reduction/guyan.hpp"

#include <algorithm>
#include <optional>
#include <string>

#include "siva/numerics/linalg.hpp"

namespace siva::reduction {

std::vector<std::size_t> select_translational(const beam::FullModel& model) {
  std::vector<std::size_t> out;
  out.reserve(model.dof_map.size());
  for (const auto& node : model.dof_map) out.push_back(node.translation);
  return out;
}

ReducedModel guyan_reduce(const beam::FullModel& model, const DenseMatrix& damping,
                          std::span<const std::size_t> masters) {
  const std::size_t n = model.dof_count();
  if (masters.empty()) throw ReductionError("guyan_reduce: master set is empty", 0);
  if (damping.rows() != n || damping.cols() != n)
    throw ReductionError("guyan_reduce: damping matrix size mismatch", 0);
  std::vector<bool> is_master(n, false);
  for (std::size_t m : masters) {
    if (m >= n) throw ReductionError("guyan_reduce: master DOF out of range", m);
    if (is_master[m]) throw ReductionError("guyan_reduce: duplicate master DOF", m);
    is_master[m] = true;
  }
  std::vector<std::size_t> slaves;
  for (std::size_t i = 0; i < n; ++i)
    if (!is_master[i]) slaves.push_back(i);

  const std::size_t nm = masters.size();
  DenseMatrix t(n, nm);
  for (std::size_t j = 0; j < nm; ++j) t(masters[j], j) = 1.0;

  if (!slaves.empty()) {
    const DenseMatrix kss = model.stiffness.select(slaves, slaves);
    const DenseMatrix ksm = model.stiffness.select(slaves, masters);
    std::optional<num::Cholesky> chol;
    try {
      chol.emplace(kss, 1e-13);
    } catch (const num::NotPositiveDefiniteError& e) {
      const std::size_t dof = slaves[e.minor_index()];
      throw ReductionError("guyan_reduce: slave stiffness block is singular; first dependent slave DOF " +
                               std::to_string(dof),
                           dof);
    }
    const DenseMatrix x = chol->solve(ksm);  // K_ss^{-1} K_sm
    for (std::size_t s = 0; s < slaves.size(); ++s)
      for (std::size_t j = 0; j < nm; ++j) t(slaves[s], j) = -x(s, j);
  }

  const DenseMatrix tt = t.transpose();
  ReducedModel r;
  r.stiffness = tt * model.stiffness * t;
  r.mass = tt * model.mass * t;
  r.damping = tt * damping * t;
  for (DenseMatrix* mat : {&r.stiffness, &r.mass, &r.damping}) {
    for (std::size_t i = 0; i < nm; ++i)
      for (std::size_t j = i + 1; j < nm; ++j) {
        const double s = 0.5 * ((*mat)(i, j) + (*mat)(j, i));
        (*mat)(i, j) = s;
        (*mat)(j, i) = s;
      }
  }
  r.master_dofs.assign(masters.begin(), masters.end());
  r.transformation = t;
  // Without a node map (hand-built models) the last master is taken as the tip.
  r.tip_index = nm - 1;
  if (!model.dof_map.empty()) {
    const auto it = std::find(masters.begin(), masters.end(), model.tip_translation());
    if (it == masters.end())
      throw ReductionError("guyan_reduce: the tip translation must be a master DOF",
                           model.tip_translation());
    r.tip_index = static_cast<std::size_t>(it - masters.begin());
  }
  return r;
}

}  // namespace siva::reduction
