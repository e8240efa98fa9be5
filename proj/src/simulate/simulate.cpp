#include "siva/simulate/simulate.hpp"

#include <cmath>
#include <fmt/format.h>
#include <future>
#include <numbers>

#include "siva/numerics/linalg.hpp"

namespace siva::sim {

void ForcingSpec::validate() const {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
    throw std::invalid_argument("forcing: amplitude must be non-negative");
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw std::invalid_argument("forcing: duration must be positive");
  if (!(start_time >= 0.0)) throw std::invalid_argument("forcing: start_time must be >= 0");
}

double half_sine(const ForcingSpec& spec, double t) noexcept {
  if (t < spec.start_time || t > spec.end_time()) return 0.0;
  return spec.amplitude * std::sin(std::numbers::pi * (t - spec.start_time) / spec.duration);
}

AttachmentSpec AttachmentSpec::linear_cubic(double k_lin, double k_nl) {
  AttachmentSpec a;
  a.coefficients = {k_lin, 0.0, k_nl, 0.0, 0.0};
  return a;
}

double AttachmentSpec::force(double u) const noexcept {
  // Horner: u (k1 + u (k2 + u (k3 + u (k4 + u k5))))
  double acc = coefficients[4];
  for (int i = 3; i >= 0; --i) acc = coefficients[static_cast<std::size_t>(i)] + u * acc;
  return u * acc;
}

double AttachmentSpec::potential(double u) const noexcept {
  double e = 0.0;
  double p = u;
  for (std::size_t i = 0; i < 5; ++i) {
    p *= u;
    e += coefficients[i] * p / static_cast<double>(i + 2);
  }
  return e;
}

void AttachmentSpec::validate() const {
  for (double k : coefficients)
    if (!std::isfinite(k)) throw std::invalid_argument("attachment: coefficients must be finite");
}

Vector GridSpec::times() const {
  if (!(duration > 0) || !(sample_rate > 0))
    throw std::invalid_argument("grid: duration and sample rate must be positive");
  return num::uniform_grid(0.0, duration, sample_rate);
}

std::size_t GridSpec::sample_count() const {
  return static_cast<std::size_t>(std::llround(duration * sample_rate)) + 1;
}

std::string to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::training: return "training";
    case DatasetRole::validation: return "validation";
    case DatasetRole::resimulation: return "resimulation";
  }
  return "unknown";
}

std::string TrajectorySet::label() const {
  return fmt::format("{}_{:g}N", to_string(role), forcing.amplitude);
}

// ---------------------------------------------------------------------------

SecondOrderSystem::SecondOrderSystem(const DenseMatrix& mass, const DenseMatrix& damping,
                                     const DenseMatrix& stiffness, std::size_t attachment_dof)
    : dim_(mass.rows()),
      attachment_dof_(attachment_dof),
      mass_(mass),
      damping_(damping),
      stiffness_(stiffness) {
  if (!mass.is_square() || damping.rows() != dim_ || damping.cols() != dim_ ||
      stiffness.rows() != dim_ || stiffness.cols() != dim_)
    throw num::DimensionError("SecondOrderSystem: matrix sizes disagree");
  if (attachment_dof >= dim_) throw num::DimensionError("SecondOrderSystem: attachment DOF out of range");
  const num::Cholesky chol(mass);
  minv_k_ = chol.solve(stiffness);
  minv_c_ = chol.solve(damping);
  minv_unit_.assign(dim_, 0.0);
  minv_unit_[attachment_dof] = 1.0;
  chol.solve_in_place(minv_unit_);
}

void SecondOrderSystem::acceleration(double t, std::span<const double> q,
                                     std::span<const double> qd,
                                     const AttachmentSpec& attachment, const ForcingSpec& forcing,
                                     std::span<double> qdd) const {
  const double tip_force = half_sine(forcing, t) - attachment.force(q[attachment_dof_]);
  for (std::size_t i = 0; i < dim_; ++i) {
    const auto rk = minv_k_.row(i);
    const auto rc = minv_c_.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += rk[j] * q[j] + rc[j] * qd[j];
    qdd[i] = minv_unit_[i] * tip_force - s;
  }
}

TrajectorySet simulate_system(const SecondOrderSystem& system, const AttachmentSpec& attachment,
                              const ForcingSpec& forcing, const GridSpec& grid,
                              const num::OdeOptions& options) {
  forcing.validate();
  attachment.validate();
  if (forcing.application_dof != system.attachment_dof())
    throw std::invalid_argument("simulate: the impact must act at the attachment DOF");
  const std::size_t n = system.dim();
  const Vector times = grid.times();
  const Vector y0(2 * n, 0.0);

  const num::OdeRhs rhs = [&](double t, std::span<const double> y, std::span<double> dydt) {
    std::copy(y.begin() + static_cast<std::ptrdiff_t>(n), y.end(), dydt.begin());
    system.acceleration(t, y.first(n), y.subspan(n), attachment, forcing, dydt.subspan(n));
  };

  num::OdeSolution sol;
  try {
    sol = num::integrate_rk45(rhs, y0, times.front(), times.back(), times, options);
  } catch (const num::IntegrationError& e) {
    throw SimulationError(fmt::format("simulation with a {:g} N impact failed: {}",
                                      forcing.amplitude, e.what()));
  }

  TrajectorySet out;
  out.times = times;
  out.forcing = forcing;
  out.q = DenseMatrix(times.size(), n);
  out.qd = DenseMatrix(times.size(), n);
  out.qdd = DenseMatrix(times.size(), n);
  for (std::size_t r = 0; r < times.size(); ++r) {
    const auto s = sol.states.row(r);
    const auto d = sol.rhs_values.row(r);
    std::copy(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n), out.q.row(r).begin());
    std::copy(s.begin() + static_cast<std::ptrdiff_t>(n), s.end(), out.qd.row(r).begin());
    std::copy(d.begin() + static_cast<std::ptrdiff_t>(n), d.end(), out.qdd.row(r).begin());
  }
  out.dofs.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.dofs[i] = i;
  out.tip_column = system.attachment_dof();
  return out;
}

TrajectorySet simulate_full(const beam::FullModel& model, const DenseMatrix& damping,
                            const AttachmentSpec& attachment, const ForcingSpec& forcing,
                            const GridSpec& grid, const num::OdeOptions& options) {
  const SecondOrderSystem system(model.mass, damping, model.stiffness, model.tip_translation());
  TrajectorySet all = simulate_system(system, attachment, forcing, grid, options);

  const std::vector<std::size_t> keep = reduction::select_translational(model);
  std::vector<std::size_t> rows(all.sample_count());
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
  TrajectorySet out;
  out.times = std::move(all.times);
  out.q = all.q.select(rows, keep);
  out.qd = all.qd.select(rows, keep);
  out.qdd = all.qdd.select(rows, keep);
  out.forcing = forcing;
  out.dofs = keep;
  out.tip_column = keep.size() - 1;
  return out;
}

TrajectorySet simulate_reduced(const reduction::ReducedModel& model,
                               const AttachmentSpec& attachment, double amplitude,
                               double pulse_duration, const GridSpec& grid,
                               const num::OdeOptions& options) {
  const SecondOrderSystem system(model.mass, model.damping, model.stiffness, model.tip_index);
  ForcingSpec forcing;
  forcing.amplitude = amplitude;
  forcing.duration = pulse_duration;
  forcing.application_dof = model.tip_index;
  TrajectorySet out = simulate_system(system, attachment, forcing, grid, options);
  out.role = DatasetRole::resimulation;
  out.dofs = model.master_dofs;
  return out;
}

DatasetBundle make_datasets(const beam::FullModel& model, const DenseMatrix& damping,
                            const AttachmentSpec& attachment, const DatasetPlan& plan,
                            const GridSpec& grid, const num::OdeOptions& options) {
  auto launch = [&](double amplitude, DatasetRole role) {
    return std::async(std::launch::async, [&, amplitude, role] {
      ForcingSpec f;
      f.amplitude = amplitude;
      f.duration = plan.pulse_duration;
      f.start_time = plan.start_time;
      f.application_dof = model.tip_translation();
      TrajectorySet set = simulate_full(model, damping, attachment, f, grid, options);
      set.role = role;
      return set;
    });
  };
  auto training = launch(plan.training_amplitude, DatasetRole::training);
  std::vector<std::future<TrajectorySet>> validation;
  for (double a : plan.validation_amplitudes) validation.push_back(launch(a, DatasetRole::validation));

  DatasetBundle bundle;
  bundle.training = training.get();
  for (auto& v : validation) bundle.validation.push_back(v.get());
  return bundle;
}

}  // namespace siva::sim
