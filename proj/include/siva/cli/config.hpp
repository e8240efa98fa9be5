#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"
#include "siva/beam/beam_model.hpp"
#include "siva/identify/trainer.hpp"
#include "siva/numerics/ode.hpp"
#include "siva/simulate/simulate.hpp"
#include "siva/sindy/sindy.hpp"

namespace siva::cli {

/// Bad configuration. `field` is the dotted JSON path, when one applies.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct SpectralConfig {
  double cwt_min_hz = 0.5;
  double cwt_max_hz = 500.0;
  std::size_t cwt_points = 200;
};

struct ExperimentConfig {
  beam::BeamSpec beam;
  sim::AttachmentSpec attachment = sim::AttachmentSpec::linear_cubic(1.1e4, 1e8);
  sim::DatasetPlan forcing;
  sim::GridSpec grid;
  std::string masters = "translational";
  ident::TrainingConfig training;
  std::size_t approach_i_samples = 1000;
  sindy::StlsqOptions sindy;
  num::OdeOptions ode;
  SpectralConfig spectral;
  std::filesystem::path output_dir = "siva-out";
  std::uint64_t seed = 42;

  void validate() const;
};

/// Parses JSON text with unit-suffixed keys; absent keys take defaults.
/// Unknown keys and keys with the wrong unit suffix are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& c);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// SHA-256 over the canonical JSON form, excluding the output directory.
std::string config_hash(const ExperimentConfig& c);

}  // namespace siva::cli
