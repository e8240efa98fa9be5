#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "siva/identify/parameters.hpp"
#include "siva/identify/physics.hpp"
#include "siva/nn/adam.hpp"
#include "siva/nn/mlp.hpp"
#include "siva/nn/rng.hpp"

namespace siva::ident {

struct TrainingConfig {
  std::size_t epochs = 1000;
  std::size_t batch_size = 500;
  double gamma = 1.0;
  double generator_learning_rate = 1e-4;
  double discriminator_learning_rate = 1e-4;
  std::size_t noise_dim = 16;
  std::uint64_t seed = 42;
  std::size_t approach_ii_start_epoch = 300;
  std::vector<std::size_t> generator_hidden = {64, 32, 16};
  std::vector<std::size_t> discriminator_hidden = {64, 32};
  /// Warn once L_D stays below collapse_loss for collapse_epochs epochs in a row.
  double collapse_loss = 0.01;
  std::size_t collapse_epochs = 50;
  nn::kernels::Backend backend = nn::kernels::Backend::parallel;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss_d = 0.0;
  double loss_adv = 0.0;
  double loss_mse = 0.0;
  double loss_p = 0.0;
  /// Batch mean of the generated parameters at the epoch's last generator step.
  ParameterVector lambda;
};

/// Per-DOF affine map applied to accelerations before the discriminator.
struct Standardization {
  Vector mean;
  Vector scale;

  static Standardization fit(const DenseMatrix& samples);
  DenseMatrix apply(const DenseMatrix& x) const;
};

/// Tracks consecutive epochs with a near-zero discriminator loss.
class CollapseMonitor {
 public:
  CollapseMonitor(double threshold, std::size_t window) : threshold_(threshold), window_(window) {}
  /// True exactly once: on the epoch that completes the first qualifying run.
  bool update(double loss_d) noexcept {
    streak_ = loss_d < threshold_ ? streak_ + 1 : 0;
    if (streak_ >= window_ && !fired_) return fired_ = true;
    return false;
  }
  std::size_t streak() const noexcept { return streak_; }

 private:
  double threshold_;
  std::size_t window_;
  std::size_t streak_ = 0;
  bool fired_ = false;
};

struct TrainingState {
  TrainingConfig config;
  nn::Mlp generator;
  nn::Mlp discriminator;
  nn::AdamState generator_adam;
  nn::AdamState discriminator_adam;
  nn::RngStream rng;
  Standardization discriminator_input;
  std::vector<EpochRecord> history;

  std::size_t completed_epochs() const noexcept { return history.size(); }
};

struct TrainingObserver {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(std::string_view)> on_warning;
};

/// Raised when a loss turns non-finite. Carries the state as it was at the
/// start of the failing epoch.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t epoch, std::shared_ptr<const TrainingState> last_good)
      : std::runtime_error(what), epoch_(epoch), last_good_(std::move(last_good)) {}
  std::size_t epoch() const noexcept { return epoch_; }
  const TrainingState& last_good() const noexcept { return *last_good_; }

 private:
  std::size_t epoch_;
  std::shared_ptr<const TrainingState> last_good_;
};

/// Two-step adversarial identification. The discriminator separates recorded
/// validation accelerations from ones generated by the physics layer; the
/// generator is trained against it plus the physics misfit on training data.
class Trainer {
 public:
  Trainer(TrainingConfig config, const reduction::ReducedModel& reduced,
          const sim::TrajectorySet& training, std::span<const sim::TrajectorySet> validation);

  struct GeneratorStep {
    double loss_adv = 0.0;
    double loss_mse = 0.0;
    ParameterVector batch_mean;
  };

  /// Returns L_D = BCE(real, 1) + BCE(fake, 0).
  double discriminator_step();
  GeneratorStep generator_step(std::span<const std::size_t> training_indices);
  const EpochRecord& run_epoch();
  const TrainingState& run(const TrainingObserver& observer = {});

  /// L_MSE for a fixed noise batch and time batch, and its gradient w.r.t. every
  /// generator parameter. Touches no state.
  double generator_mse_gradient(const nn::Mlp& generator, const DenseMatrix& z,
                                std::span<const std::size_t> training_indices, Vector* grad) const;

  const TrainingState& state() const noexcept { return state_; }
  TrainingState& state() noexcept { return state_; }
  const PhysicsLayer& physics() const noexcept { return layer_; }
  const PhysicsData& training_data() const noexcept { return training_; }
  const PhysicsData& validation_data() const noexcept { return validation_; }

 private:
  DenseMatrix draw_noise(std::size_t rows);
  std::vector<std::size_t> draw_validation_indices(std::size_t count);

  PhysicsLayer layer_;
  PhysicsData training_;
  PhysicsData validation_;
  TrainingState state_;
  CollapseMonitor collapse_;
  const TrainingObserver* observer_ = nullptr;
};

TrainingState train(const TrainingConfig& config, const reduction::ReducedModel& reduced,
                    const sim::TrajectorySet& training,
                    std::span<const sim::TrajectorySet> validation,
                    const TrainingObserver& observer = {});

}  // namespace siva::ident
