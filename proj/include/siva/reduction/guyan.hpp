#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "siva/beam/beam_model.hpp"
#include "siva/numerics/dense_matrix.hpp"

namespace siva::reduction {

using num::DenseMatrix;

class ReductionError : public std::runtime_error {
 public:
  ReductionError(const std::string& what, std::size_t dof)
      : std::runtime_error(what), dof_(dof) {}
  /// Full-model DOF index the failure refers to.
  std::size_t dof() const noexcept { return dof_; }

 private:
  std::size_t dof_;
};

struct ReducedModel {
  DenseMatrix mass;       // M_R
  DenseMatrix damping;    // C_R
  DenseMatrix stiffness;  // K_R
  std::vector<std::size_t> master_dofs;
  /// Full-to-reduced map q_full = T q_master (full rows, master columns).
  DenseMatrix transformation;
  /// Position of the tip translation within the reduced ordering.
  std::size_t tip_index = 0;

  std::size_t dim() const noexcept { return mass.rows(); }
};

/// Translational DOFs of the free nodes, root to tip.
std::vector<std::size_t> select_translational(const beam::FullModel& model);

/// Static condensation onto `masters`. The transformation comes from the
/// beam's own stiffness, so attachment springs never enter it.
ReducedModel guyan_reduce(const beam::FullModel& model, const DenseMatrix& damping,
                          std::span<const std::size_t> masters);

}  // namespace siva::reduction
