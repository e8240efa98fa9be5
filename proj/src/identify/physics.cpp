#include "siva/identify/physics.hpp"

#include <fmt/format.h>

namespace siva::ident {

namespace {

// q^1 .. q^5
inline std::array<double, kParameterCount> powers(double q) noexcept {
  std::array<double, kParameterCount> p{};
  double v = q;
  for (auto& x : p) {
    x = v;
    v *= q;
  }
  return p;
}

inline double kappa(const double* k, double q) noexcept {
  double f = 0.0;
  for (std::size_t i = kParameterCount; i-- > 0;) f = (f + k[i]) * q;
  return f;
}

void check_batch(const PhysicsData& data, const Vector& g, std::span<const std::size_t> time_idx,
                 std::size_t k_rows, std::size_t k_cols) {
  if (g.size() != data.base.cols())
    throw num::DimensionError("physics: tip influence size does not match the data");
  if (k_cols != kParameterCount) throw num::DimensionError("physics: lambda rows must have 5 entries");
  if (time_idx.empty() || k_rows == 0) throw num::DimensionError("physics: empty batch");
  for (auto t : time_idx)
    if (t >= data.sample_count())
      throw std::out_of_range(fmt::format("physics: time index {} beyond {} samples", t,
                                          data.sample_count()));
}

}  // namespace

PhysicsLayer::PhysicsLayer(const reduction::ReducedModel& model)
    : model_(&model),
      dim_(model.dim()),
      tip_(model.tip_index),
      mass_factor_(model.mass),
      g_(model.dim(), 0.0) {
  if (model.damping.rows() != dim_ || model.stiffness.rows() != dim_)
    throw num::DimensionError("PhysicsLayer: inconsistent reduced matrices");
  if (tip_ >= dim_) throw num::DimensionError("PhysicsLayer: tip index out of range");
  g_[tip_] = 1.0;
  mass_factor_.solve_in_place(g_);
}

void PhysicsLayer::base_acceleration(std::span<const double> q, std::span<const double> qd,
                                     std::span<const double> force, std::span<double> out) const {
  if (q.size() != dim_ || qd.size() != dim_ || force.size() != dim_ || out.size() != dim_)
    throw num::DimensionError(fmt::format("physics_accel: vectors must have {} entries", dim_));
  const auto& m = *model_;
  for (std::size_t i = 0; i < dim_; ++i) {
    double s = force[i];
    const auto c = m.damping.row(i);
    const auto k = m.stiffness.row(i);
    for (std::size_t j = 0; j < dim_; ++j) s -= c[j] * qd[j] + k[j] * q[j];
    out[i] = s;
  }
  mass_factor_.solve_in_place(out);
}

void PhysicsLayer::acceleration(const ParameterVector& lambda, std::span<const double> q,
                                std::span<const double> qd, std::span<const double> force,
                                std::span<double> out) const {
  base_acceleration(q, qd, force, out);
  const double f = lambda.restoring_force(q[tip_]);
  for (std::size_t j = 0; j < dim_; ++j) out[j] -= g_[j] * f;
}

DenseMatrix PhysicsLayer::acceleration_gradient(std::span<const double> q) const {
  if (q.size() != dim_) throw num::DimensionError("accel_grad_wrt_k: wrong state size");
  const auto p = powers(q[tip_]);
  DenseMatrix d(dim_, kParameterCount);
  for (std::size_t j = 0; j < dim_; ++j)
    for (std::size_t i = 0; i < kParameterCount; ++i) d(j, i) = -g_[j] * p[i];
  return d;
}

Vector physics_accel(const reduction::ReducedModel& model, const ParameterVector& lambda,
                     std::span<const double> q, std::span<const double> qd,
                     std::span<const double> force) {
  const PhysicsLayer layer(model);
  Vector out(layer.dim());
  layer.acceleration(lambda, q, qd, force, out);
  return out;
}

DenseMatrix accel_grad_wrt_k(const reduction::ReducedModel& model, std::span<const double> q) {
  return PhysicsLayer(model).acceleration_gradient(q);
}

PhysicsData prepare_physics_data(const PhysicsLayer& layer, const sim::TrajectorySet& set) {
  const auto& m = layer.model();
  if (set.dof_count() != layer.dim())
    throw num::DimensionError(fmt::format("record '{}' has {} DOFs, reduced model has {}",
                                          set.label(), set.dof_count(), layer.dim()));
  if (!m.master_dofs.empty() && set.dofs != m.master_dofs)
    throw std::invalid_argument(
        fmt::format("record '{}' columns are not the reduced model's master DOFs", set.label()));
  if (!m.master_dofs.empty() && set.forcing.application_dof != m.master_dofs[layer.tip_index()])
    throw std::invalid_argument(fmt::format("record '{}' is not forced at the tip", set.label()));

  const std::size_t n = layer.dim(), rows = set.sample_count();
  PhysicsData d;
  d.base = DenseMatrix(rows, n);
  d.measured = set.qdd;
  d.tip_q = set.q.col(layer.tip_index());
  d.d_norm2.assign(rows, 0.0);
  d.d_dot_g.assign(rows, 0.0);
  const auto& g = layer.tip_influence();
  d.g_norm2 = num::dot(g, g);
  Vector force(n, 0.0);
  for (std::size_t t = 0; t < rows; ++t) {
    force[layer.tip_index()] = sim::half_sine(set.forcing, set.times[t]);
    layer.base_acceleration(set.q.row(t), set.qd.row(t), force, d.base.row(t));
    double dn = 0.0, dg = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double r = d.base(t, j) - d.measured(t, j);
      dn += r * r;
      dg += r * g[j];
    }
    d.d_norm2[t] = dn;
    d.d_dot_g[t] = dg;
  }
  return d;
}

PhysicsData pool(std::span<const PhysicsData> parts) {
  if (parts.empty()) throw std::invalid_argument("pool: no records");
  std::size_t rows = 0;
  const std::size_t n = parts.front().base.cols();
  for (const auto& p : parts) {
    if (p.base.cols() != n) throw num::DimensionError("pool: records differ in width");
    rows += p.sample_count();
  }
  PhysicsData d;
  d.base = DenseMatrix(rows, n);
  d.measured = DenseMatrix(rows, n);
  d.g_norm2 = parts.front().g_norm2;
  std::size_t r0 = 0;
  for (const auto& p : parts) {
    for (std::size_t t = 0; t < p.sample_count(); ++t) {
      std::ranges::copy(p.base.row(t), d.base.row(r0 + t).begin());
      std::ranges::copy(p.measured.row(t), d.measured.row(r0 + t).begin());
    }
    d.tip_q.insert(d.tip_q.end(), p.tip_q.begin(), p.tip_q.end());
    d.d_norm2.insert(d.d_norm2.end(), p.d_norm2.begin(), p.d_norm2.end());
    d.d_dot_g.insert(d.d_dot_g.end(), p.d_dot_g.begin(), p.d_dot_g.end());
    r0 += p.sample_count();
  }
  return d;
}

namespace serial {

MseResult physics_mse(const PhysicsData& data, const Vector& g,
                      std::span<const std::size_t> time_idx, const DenseMatrix& k,
                      bool want_gradient) {
  check_batch(data, g, time_idx, k.rows(), k.cols());
  const std::size_t n = g.size();
  const double scale =
      1.0 / static_cast<double>(k.rows() * time_idx.size() * n);
  MseResult r;
  if (want_gradient) r.grad_k = DenseMatrix(k.rows(), kParameterCount);
  double total = 0.0;
  for (std::size_t s = 0; s < k.rows(); ++s) {
    const double* ks = k.row(s).data();
    for (const std::size_t t : time_idx) {
      const double q = data.tip_q[t];
      const double kap = kappa(ks, q);
      double dkap = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = data.base(t, j) - g[j] * kap - data.measured(t, j);
        total += e * e;
        dkap -= 2.0 * e * g[j];
      }
      if (want_gradient) {
        const auto p = powers(q);
        for (std::size_t i = 0; i < kParameterCount; ++i) r.grad_k(s, i) += scale * dkap * p[i];
      }
    }
  }
  r.loss = total * scale;
  return r;
}

}  // namespace serial

namespace parallel {

// Uses |d - g kappa|^2 = |d|^2 - 2 kappa d.g + kappa^2 |g|^2. Each lambda row
// is reduced serially over time; row totals are then summed in row order, so
// the result does not depend on the thread count.
MseResult physics_mse(const PhysicsData& data, const Vector& g,
                      std::span<const std::size_t> time_idx, const DenseMatrix& k,
                      bool want_gradient) {
  check_batch(data, g, time_idx, k.rows(), k.cols());
  const std::size_t n = g.size();
  const double scale = 1.0 / static_cast<double>(k.rows() * time_idx.size() * n);
  const double gg = data.g_norm2;
  MseResult r;
  if (want_gradient) r.grad_k = DenseMatrix(k.rows(), kParameterCount);
  Vector row_total(k.rows(), 0.0);
  const auto rows = static_cast<std::ptrdiff_t>(k.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < rows; ++si) {
    const auto s = static_cast<std::size_t>(si);
    const double* ks = k.row(s).data();
    double acc = 0.0;
    std::array<double, kParameterCount> grad{};
    for (const std::size_t t : time_idx) {
      const double q = data.tip_q[t];
      const double kap = kappa(ks, q);
      acc += data.d_norm2[t] - 2.0 * kap * data.d_dot_g[t] + kap * kap * gg;
      if (want_gradient) {
        const double dkap = 2.0 * (kap * gg - data.d_dot_g[t]);
        double qp = q;
        for (std::size_t i = 0; i < kParameterCount; ++i) {
          grad[i] += dkap * qp;
          qp *= q;
        }
      }
    }
    row_total[s] = acc;
    if (want_gradient)
      for (std::size_t i = 0; i < kParameterCount; ++i) r.grad_k(s, i) = scale * grad[i];
  }
  double total = 0.0;
  for (double v : row_total) total += v;
  r.loss = total * scale;
  return r;
}

}  // namespace parallel

MseResult physics_mse(nn::kernels::Backend backend, const PhysicsData& data, const Vector& g,
                      std::span<const std::size_t> time_idx, const DenseMatrix& k,
                      bool want_gradient) {
  return backend == nn::kernels::Backend::serial
             ? serial::physics_mse(data, g, time_idx, k, want_gradient)
             : parallel::physics_mse(data, g, time_idx, k, want_gradient);
}

DenseMatrix paired_fake_accelerations(const PhysicsData& data, const Vector& g,
                                      std::span<const std::size_t> time_idx, const DenseMatrix& k) {
  check_batch(data, g, time_idx, k.rows(), k.cols());
  if (time_idx.size() != k.rows())
    throw num::DimensionError("paired_fake_accelerations: one time index per lambda row");
  const std::size_t n = g.size();
  DenseMatrix out(k.rows(), n);
  for (std::size_t i = 0; i < k.rows(); ++i) {
    const std::size_t t = time_idx[i];
    const double kap = kappa(k.row(i).data(), data.tip_q[t]);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = data.base(t, j) - g[j] * kap;
  }
  return out;
}

DenseMatrix paired_fake_backward(const PhysicsData& data, const Vector& g,
                                 std::span<const std::size_t> time_idx,
                                 const DenseMatrix& grad_fake) {
  if (grad_fake.rows() != time_idx.size() || grad_fake.cols() != g.size())
    throw num::DimensionError("paired_fake_backward: gradient shape mismatch");
  DenseMatrix out(time_idx.size(), kParameterCount);
  for (std::size_t i = 0; i < time_idx.size(); ++i) {
    double dkap = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) dkap -= grad_fake(i, j) * g[j];
    const auto p = powers(data.tip_q[time_idx[i]]);
    for (std::size_t c = 0; c < kParameterCount; ++c) out(i, c) = dkap * p[c];
  }
  return out;
}

}  // namespace siva::ident
