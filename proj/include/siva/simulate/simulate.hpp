#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "siva/beam/beam_model.hpp"
#include "siva/numerics/dense_matrix.hpp"
#include "siva/numerics/ode.hpp"
#include "siva/reduction/guyan.hpp"

namespace siva::sim {

using num::DenseMatrix;
using num::Vector;

/// Half-sine impact amplitude * sin(pi (t - start) / duration) on [start, start + duration].
struct ForcingSpec {
  double amplitude = 2000.0;  // N
  double duration = 0.00635;  // s
  std::size_t application_dof = 0;
  double start_time = 0.0;  // s

  void validate() const;
  double end_time() const noexcept { return start_time + duration; }
};

double half_sine(const ForcingSpec& spec, double t) noexcept;

/// Polynomial attachment force sum_{i=1..5} k_i u^i acting at one DOF.
struct AttachmentSpec {
  std::array<double, 5> coefficients{};  // k1 [N/m] .. k5 [N/m^5]

  static AttachmentSpec linear_cubic(double k_lin, double k_nl);

  double force(double u) const noexcept;
  /// Stored energy: integral of force from 0 to u.
  double potential(double u) const noexcept;
  void validate() const;
};

struct GridSpec {
  double duration = 4.0;        // s
  double sample_rate = 2000.0;  // Hz

  Vector times() const;
  std::size_t sample_count() const;
};

enum class DatasetRole { training, validation, resimulation };
std::string to_string(DatasetRole role);

/// Sampled response restricted to a set of DOFs. Rows are time samples.
struct TrajectorySet {
  Vector times;
  DenseMatrix q;    // m
  DenseMatrix qd;   // m/s
  DenseMatrix qdd;  // m/s^2
  ForcingSpec forcing;
  DatasetRole role = DatasetRole::training;
  /// Source-model DOF index of each column.
  std::vector<std::size_t> dofs;
  std::size_t tip_column = 0;

  std::size_t sample_count() const noexcept { return times.size(); }
  std::size_t dof_count() const noexcept { return q.cols(); }
  Vector tip_displacement() const { return q.col(tip_column); }
  std::string label() const;
};

/// M qdd + C qd + K q + attachment(q[a]) e_a = F(t) e_f, with M, C, K stored
/// after a one-off Cholesky solve against M.
class SecondOrderSystem {
 public:
  SecondOrderSystem(const DenseMatrix& mass, const DenseMatrix& damping,
                    const DenseMatrix& stiffness, std::size_t attachment_dof);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t attachment_dof() const noexcept { return attachment_dof_; }
  const DenseMatrix& mass() const noexcept { return mass_; }
  const DenseMatrix& damping() const noexcept { return damping_; }
  const DenseMatrix& stiffness() const noexcept { return stiffness_; }

  /// qdd for the given state.
  void acceleration(double t, std::span<const double> q, std::span<const double> qd,
                    const AttachmentSpec& attachment, const ForcingSpec& forcing,
                    std::span<double> qdd) const;

 private:
  std::size_t dim_;
  std::size_t attachment_dof_;
  DenseMatrix mass_, damping_, stiffness_;
  DenseMatrix minv_k_, minv_c_;
  Vector minv_unit_;  // M^{-1} e_a
};

/// Integrates from rest and returns every DOF of the system.
TrajectorySet simulate_system(const SecondOrderSystem& system, const AttachmentSpec& attachment,
                              const ForcingSpec& forcing, const GridSpec& grid,
                              const num::OdeOptions& options = {});

/// Full FE model response restricted to the translational DOFs.
TrajectorySet simulate_full(const beam::FullModel& model, const DenseMatrix& damping,
                            const AttachmentSpec& attachment, const ForcingSpec& forcing,
                            const GridSpec& grid, const num::OdeOptions& options = {});

/// Reduced model response; the forcing acts at the reduced tip.
TrajectorySet simulate_reduced(const reduction::ReducedModel& model,
                               const AttachmentSpec& attachment, double amplitude,
                               double pulse_duration, const GridSpec& grid,
                               const num::OdeOptions& options = {});

struct DatasetPlan {
  double training_amplitude = 2000.0;
  std::vector<double> validation_amplitudes = {1000.0, 3000.0};
  double pulse_duration = 0.00635;
  double start_time = 0.0;
};

struct DatasetBundle {
  TrajectorySet training;
  std::vector<TrajectorySet> validation;
};

/// One full-model simulation per amplitude; the runs execute concurrently.
DatasetBundle make_datasets(const beam::FullModel& model, const DenseMatrix& damping,
                            const AttachmentSpec& attachment, const DatasetPlan& plan,
                            const GridSpec& grid, const num::OdeOptions& options = {});

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace siva::sim
