#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "siva/cli/config.hpp"
#include "siva/identify/estimates.hpp"
#include "siva/uq/normal_fit.hpp"

namespace siva::cli {

enum class Stage { build, simulate, reduce, identify, baseline, uq, report };
inline constexpr Stage kAllStages[] = {Stage::build,    Stage::simulate, Stage::reduce, Stage::identify,
                                       Stage::baseline, Stage::uq,       Stage::report};

std::string to_string(Stage s);
/// Throws ConfigError for an unknown name.
Stage stage_from_string(std::string_view name);

/// A stage failed. Carries enough to find what was on disk when it did.
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, std::string config_hash, std::string last_artifact, const std::string& cause);
  Stage stage() const noexcept { return stage_; }
  const std::string& config_hash() const noexcept { return config_hash_; }
  const std::string& last_artifact() const noexcept { return last_artifact_; }

 private:
  Stage stage_;
  std::string config_hash_;
  std::string last_artifact_;
};

struct PipelineOptions {
  Stage stop_after = Stage::report;
  /// Reuse simulate/identify outputs whose inputs and files are unchanged.
  bool use_cache = true;
  std::function<void(std::string_view)> log;
  /// Epoch stride of training progress messages; 0 silences them.
  std::size_t progress_every = 50;
};

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct SindyCoefficient {
  std::string label;
  double value = 0.0;
};

struct ReportBundle {
  std::string config_hash;
  std::uint64_t seed = 0;
  Stage completed = Stage::build;
  std::vector<Stage> cached;

  std::optional<ident::ParameterEstimate> approach_i;
  std::optional<ident::ParameterEstimate> approach_ii;
  std::optional<ident::ParameterEstimate> sindy;
  std::optional<ident::ParameterEstimate> best;
  std::vector<SindyCoefficient> sindy_coefficients;
  std::vector<ident::EpochRecord> training_log;
  std::vector<uq::NormalFit> uq;
  /// Relative L2 error of the Approach I tip displacement, keyed by dataset label.
  std::map<std::string, double> tip_relative_l2;
  /// Maximum |q_N| of the training record [m].
  double tip_peak = 0.0;
  std::vector<std::string> warnings;
  std::vector<ManifestEntry> manifest;
  double runtime_s = 0.0;
};

ReportBundle run_pipeline(const ExperimentConfig& config, const PipelineOptions& options = {});

/// Relative paths of the fixed artifacts.
namespace artifacts {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kModal = "model/modal.json";
inline constexpr const char* kReduced = "model/reduced.json";
inline constexpr const char* kDatasets = "data/datasets.json";
inline constexpr const char* kTrainingLog = "identify/training_log.csv";
inline constexpr const char* kGenerator = "identify/generator.json";
inline constexpr const char* kEstimates = "identify/estimates.json";
inline constexpr const char* kSindy = "baseline/sindy.json";
inline constexpr const char* kComparison = "baseline/comparison.json";
inline constexpr const char* kUq = "uq/uq.json";
inline constexpr const char* kReport = "report/report.json";
}  // namespace artifacts

/// Recomputes every hash in `dir`/manifest.json; returns the mismatching paths.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

}  // namespace siva::cli
