#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "siva/cli/config.hpp"
#include "siva/cli/io.hpp"
#include "siva/cli/pipeline.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;

namespace fs = std::filesystem;
using namespace siva::cli;

int run(const fs::path& config_path, const std::string& stage, std::optional<std::uint64_t> seed,
        const std::optional<fs::path>& out, bool no_cache, bool quiet) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.output_dir = *out;
  cfg.training.seed = cfg.seed;
  cfg.validate();

  PipelineOptions opt;
  opt.stop_after = stage_from_string(stage);
  opt.use_cache = !no_cache;
  if (!quiet) opt.log = [](std::string_view m) { fmt::print(stderr, "{}\n", m); };
  const auto bundle = run_pipeline(cfg, opt);

  fmt::print("completed stage {} in {:.1f} s; {} artifacts under {}\n", to_string(bundle.completed),
             bundle.runtime_s, bundle.manifest.size(), cfg.output_dir.string());
  if (bundle.approach_i) {
    const auto& k = bundle.approach_i->values;
    fmt::print("approach I: k1 {:.6g}  k2 {:.6g}  k3 {:.6g}  k4 {:.6g}  k5 {:.6g}\n", k[0], k[1], k[2], k[3], k[4]);
  }
  if (bundle.best) fmt::print("best by resimulation: {}\n", to_string(bundle.best->method));
  return 0;
}

void print_csv(const fs::path& path, std::size_t max_rows) {
  const auto t = read_csv(path);
  fmt::print("{}: {} rows x {} columns\n", path.string(), t.rows.rows(), t.header.size());
  const std::size_t cols = std::min<std::size_t>(t.header.size(), 8);
  for (std::size_t c = 0; c < cols; ++c) fmt::print("{:>16}", t.header[c]);
  if (cols < t.header.size()) fmt::print("  ...");
  fmt::print("\n");
  const std::size_t rows = std::min(t.rows.rows(), max_rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) fmt::print("{:>16.8g}", t.rows(r, c));
    fmt::print("\n");
  }
  if (rows < t.rows.rows()) fmt::print("... {} more rows\n", t.rows.rows() - rows);
}

int inspect(const fs::path& path, std::size_t max_rows) {
  if (!fs::exists(path)) throw std::runtime_error(fmt::format("{} does not exist", path.string()));
  if (path.extension() == ".json")
    fmt::print("{}\n", read_json(path).dump(2));
  else if (path.extension() == ".csv")
    print_csv(path, max_rows);
  else
    throw std::runtime_error(fmt::format("{}: expected a .json or .csv artifact", path.string()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed adversarial identification of a nonlinear beam attachment"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Execute the pipeline");
  fs::path config;
  std::string stage = "report";
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  bool no_cache = false, quiet = false;
  run_cmd->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--stage", stage, "Stop after this stage")
      ->check(CLI::IsMember({"build", "simulate", "reduce", "identify", "baseline", "uq", "report"}));
  run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_option("--out", out, "Override the output directory");
  run_cmd->add_flag("--no-cache", no_cache, "Recompute every stage");
  run_cmd->add_flag("--quiet", quiet, "Suppress progress messages");

  auto* inspect_cmd = app.add_subcommand("inspect", "Pretty-print an emitted JSON or CSV artifact");
  fs::path artifact;
  std::size_t rows = 20;
  inspect_cmd->add_option("artifact", artifact, "Artifact path")->required();
  inspect_cmd->add_option("--rows", rows, "CSV rows to show");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) return run(config, stage, seed, out, no_cache, quiet);
    return inspect(artifact, rows);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kNumericalFailure;
  }
}
