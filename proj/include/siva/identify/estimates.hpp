#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siva/identify/parameters.hpp"
#include "siva/identify/trainer.hpp"
#include "siva/numerics/ode.hpp"
#include "siva/reduction/guyan.hpp"
#include "siva/simulate/simulate.hpp"

namespace siva::ident {

enum class EstimateMethod { approach_i, approach_ii, best_by_simulation, sindy, reference };

std::string to_string(EstimateMethod m);

struct ParameterEstimate {
  ParameterVector values;
  EstimateMethod method = EstimateMethod::approach_i;
  std::size_t sample_count = 1;
  ParameterVector mean;
  ParameterVector stddev;
  /// Tip-displacement MSE of the resimulated model [m^2], once evaluated.
  std::optional<double> mse;
  /// Why resimulation failed, if it did.
  std::string failure;

  static ParameterEstimate point(const ParameterVector& values, EstimateMethod method);
};

/// Mean and unbiased standard deviation of each coefficient over `samples`.
ParameterEstimate summarize(std::span<const ParameterVector> samples, EstimateMethod method);

/// Mean of n fresh generator draws. The noise comes from a stream seeded from
/// the training seed, so repeated calls agree and training state is untouched.
ParameterEstimate approach_I(const TrainingState& state, std::size_t n = 1000);
ParameterEstimate approach_I(const nn::Mlp& generator, std::size_t noise_dim, std::size_t n,
                             nn::RngStream& rng);

/// Mean of the recorded per-epoch lambda over epochs start_epoch..last (1-based).
ParameterEstimate approach_II(const TrainingState& state, std::size_t start_epoch);

/// Tip displacement of the reduced model with `values` at the attachment,
/// driven like `reference`.
sim::TrajectorySet resimulate(const reduction::ReducedModel& reduced, const ParameterVector& values,
                              const sim::TrajectorySet& reference,
                              const num::OdeOptions& options = {});

/// Attaches the tip MSE against `reference` to every candidate and returns the
/// one with the smallest MSE. A candidate whose simulation fails gets an
/// infinite MSE and a failure note.
ParameterEstimate select_best(std::vector<ParameterEstimate>& candidates,
                              const reduction::ReducedModel& reduced,
                              const sim::TrajectorySet& reference,
                              const num::OdeOptions& options = {});

}  // namespace siva::ident
