#pragma once

#include <cstddef>
#include <span>

#include "siva/identify/parameters.hpp"
#include "siva/nn/kernels.hpp"
#include "siva/numerics/linalg.hpp"
#include "siva/reduction/guyan.hpp"
#include "siva/simulate/simulate.hpp"

namespace siva::ident {

/// Reduced equations of motion with the polynomial attachment at the tip:
///   qdd = M^{-1} (-C qd - K q - kappa(q_N) e_N + F).
/// M is held as a Cholesky factor and applied by triangular solves.
class PhysicsLayer {
 public:
  explicit PhysicsLayer(const reduction::ReducedModel& model);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t tip_index() const noexcept { return tip_; }
  const reduction::ReducedModel& model() const noexcept { return *model_; }
  /// g = M^{-1} e_N
  const Vector& tip_influence() const noexcept { return g_; }

  /// M^{-1} (-C qd - K q + F): everything except the attachment.
  void base_acceleration(std::span<const double> q, std::span<const double> qd,
                         std::span<const double> force, std::span<double> out) const;
  void acceleration(const ParameterVector& lambda, std::span<const double> q,
                    std::span<const double> qd, std::span<const double> force,
                    std::span<double> out) const;
  /// d qdd_j / d k_i = -g_j q_N^i as a dim x 5 matrix.
  DenseMatrix acceleration_gradient(std::span<const double> q) const;

 private:
  const reduction::ReducedModel* model_;
  std::size_t dim_;
  std::size_t tip_;
  num::Cholesky mass_factor_;
  Vector g_;
};

Vector physics_accel(const reduction::ReducedModel& model, const ParameterVector& lambda,
                     std::span<const double> q, std::span<const double> qd,
                     std::span<const double> force);
DenseMatrix accel_grad_wrt_k(const reduction::ReducedModel& model, std::span<const double> q);

/// Per-sample quantities of one record that do not depend on lambda.
struct PhysicsData {
  DenseMatrix base;      // T x n, base acceleration
  DenseMatrix measured;  // T x n, recorded qdd
  Vector tip_q;          // T
  /// Factored residual terms with d_t = base_t - measured_t:
  Vector d_norm2;  // |d_t|^2
  Vector d_dot_g;  // d_t . g
  double g_norm2 = 0.0;

  std::size_t sample_count() const noexcept { return tip_q.size(); }
};

/// Evaluates the base acceleration of every sample of `set`. The set's columns
/// must be the reduced model's master DOFs and the forcing must act at the tip.
PhysicsData prepare_physics_data(const PhysicsLayer& layer, const sim::TrajectorySet& set);
/// Stacks several records (e.g. the validation amplitudes) into one pool.
PhysicsData pool(std::span<const PhysicsData> parts);

struct MseResult {
  double loss = 0.0;
  DenseMatrix grad_k;  // S x 5, d loss / d k; empty when not requested
};

/// Mean over every (lambda sample, time index, DOF) triple of
/// (fake - measured)^2, where fake = base - g kappa(lambda_s, q_N,t).
/// `k` holds one lambda per row.
MseResult physics_mse(nn::kernels::Backend backend, const PhysicsData& data, const Vector& g,
                      std::span<const std::size_t> time_idx, const DenseMatrix& k,
                      bool want_gradient = true);

namespace serial {
MseResult physics_mse(const PhysicsData& data, const Vector& g,
                      std::span<const std::size_t> time_idx, const DenseMatrix& k,
                      bool want_gradient = true);
}
namespace parallel {
MseResult physics_mse(const PhysicsData& data, const Vector& g,
                      std::span<const std::size_t> time_idx, const DenseMatrix& k,
                      bool want_gradient = true);
}

/// Row i: base_{t_i} - g kappa(k_i, q_N,t_i). Pairs the i-th lambda with the i-th index.
DenseMatrix paired_fake_accelerations(const PhysicsData& data, const Vector& g,
                                      std::span<const std::size_t> time_idx, const DenseMatrix& k);

/// Gradient of a loss w.r.t. each lambda row, given the loss gradient w.r.t. the
/// paired fake accelerations.
DenseMatrix paired_fake_backward(const PhysicsData& data, const Vector& g,
                                 std::span<const std::size_t> time_idx,
                                 const DenseMatrix& grad_fake);

}  // namespace siva::ident
