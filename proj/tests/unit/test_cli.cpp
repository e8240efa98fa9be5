#include <filesystem>
#include <set>

#include <fmt/format.h>

#include "doctest.h"
#include "siva/cli/config.hpp"
#include "siva/cli/io.hpp"
#include "siva/cli/pipeline.hpp"

using namespace siva;
using namespace siva::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / fmt::format("siva_test_cli_{}", name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny(const fs::path& out) {
  auto c = parse_config(R"({"grid": {"duration_s": 0.5},
                            "training": {"epochs": 2, "batch_size": 100, "approach_ii_start_epoch": 1,
                                         "approach_i_samples": 50},
                            "spectral": {"cwt_points": 16}})");
  c.output_dir = out;
  return c;
}

std::set<std::string> files_under(const fs::path& dir) {
  std::set<std::string> s;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) s.insert(fs::relative(e.path(), dir).generic_string());
  return s;
}

}  // namespace

TEST_CASE("empty config yields the reference experiment") {
  for (const char* text : {"", "  \n", "{}"}) {
    const auto c = parse_config(text);
    CHECK(c.beam.elastic_modulus == 180e9);
    CHECK(c.beam.density == 7800.0);
    CHECK(c.beam.length == 1.524);
    CHECK(c.beam.width == 0.0381);
    CHECK(c.beam.thickness == 0.0064);
    CHECK(c.beam.tip_mass == 0.0522);
    CHECK(c.forcing.pulse_duration == 0.00635);
    CHECK(c.forcing.training_amplitude == 2000.0);
    CHECK(c.forcing.validation_amplitudes == std::vector<double>{1000.0, 3000.0});
    CHECK(c.grid.duration == 4.0);
    CHECK(c.grid.sample_rate == 2000.0);
    CHECK(c.training.gamma == 1.0);
    CHECK(c.training.generator_learning_rate == 1e-4);
    CHECK(c.training.discriminator_learning_rate == 1e-4);
    CHECK(c.training.batch_size == 500);
    CHECK(c.training.epochs == 1000);
    CHECK(c.training.approach_ii_start_epoch == 300);
    CHECK(c.seed == 42);
    CHECK(c.training.seed == 42);
    CHECK(c.attachment.coefficients[0] == 1.1e4);
    CHECK(c.attachment.coefficients[2] == 1e8);
  }
}

TEST_CASE("overrides touch only the named field") {
  const auto base = parse_config("{}");
  auto c = parse_config(R"({"training": {"epochs": 300}})");
  CHECK(c.training.epochs == 300);
  CHECK_FALSE(c == base);
  c.training.epochs = 1000;
  CHECK(c == base);
}

TEST_CASE("config errors name the field") {
  auto field_of = [](const char* text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<no error>");
  };
  CHECK(field_of(R"({"beam": {"thickness_m": -0.001}})") == "beam.thickness_m");
  CHECK(field_of(R"({"beam": {"thickness_mm": 6.4}})") == "beam.thickness_mm");
  CHECK(field_of(R"({"beam": {"colour": "red"}})") == "beam.colour");
  CHECK(field_of(R"({"extra": 1})") == "extra");
  CHECK(field_of(R"({"grid": {"sample_rate_khz": 2}})") == "grid.sample_rate_khz");
  CHECK(field_of(R"({"forcing": {"validation_amplitudes_n": [2000]}})") == "forcing.validation_amplitudes_n");
  CHECK(field_of(R"({"training": {"epochs": "many"}})") == "training.epochs");
  CHECK(field_of(R"({"training": {"backend": "gpu"}})") == "training.backend");
  CHECK(field_of(R"({"training": {"epochs": 100, "approach_ii_start_epoch": 300}})") ==
        "training.approach_ii_start_epoch");
  CHECK(field_of(R"({"spectral": {"cwt_max_hz": 5000}})") == "spectral.cwt_max_hz");
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"beam": {"length_cm": 152}})"), doctest::Contains("length_m"), ConfigError);
}

TEST_CASE("config round trip and hash") {
  auto c = parse_config(R"({"seed": 7, "training": {"gamma": 0.5, "generator_hidden": [8, 4]},
                            "forcing": {"validation_amplitudes_n": [500, 1500, 2500]}})");
  const auto again = parse_config(to_json(c).dump());
  CHECK(again == c);
  CHECK(config_hash(again) == config_hash(c));
  auto moved = c;
  moved.output_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(c));
  moved.seed = 8;
  CHECK(config_hash(moved) != config_hash(c));
}

TEST_CASE("hashing and number formatting") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  for (const double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 1e8})
    CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("CSV and trajectory round trips are exact") {
  const auto dir = scratch("csv");
  num::DenseMatrix m{{0.1, 1.0 / 3.0}, {-7.25e-9, 1e300}};
  write_csv(dir / "m.csv", std::vector<std::string>{"a", "b"}, m);
  const auto t = read_csv(dir / "m.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.rows == m);

  sim::TrajectorySet s;
  s.times = {0.0, 0.0005};
  s.q = num::DenseMatrix{{1e-3, 2e-3}, {3e-3, 1.0 / 7.0}};
  s.qd = num::DenseMatrix{{0.5, -0.5}, {0.25, 0.125}};
  s.qdd = num::DenseMatrix{{10.0, 20.0}, {30.0, 40.0}};
  s.forcing.amplitude = 3000.0;
  s.role = sim::DatasetRole::validation;
  s.dofs = {0, 2};
  s.tip_column = 1;
  write_trajectory(dir / "s.csv", s);
  const auto back = read_trajectory(dir / "s.csv", trajectory_metadata(s));
  CHECK(back.times == s.times);
  CHECK(back.q == s.q);
  CHECK(back.qd == s.qd);
  CHECK(back.qdd == s.qdd);
  CHECK(back.role == s.role);
  CHECK(back.dofs == s.dofs);
  CHECK(back.tip_column == 1);
  CHECK(back.label() == s.label());
  fs::remove_all(dir);
}

TEST_CASE("stopping after simulate writes datasets only") {
  const auto dir = scratch("stage");
  PipelineOptions opt;
  opt.stop_after = Stage::simulate;
  const auto b = run_pipeline(tiny(dir), opt);
  CHECK(b.completed == Stage::simulate);
  CHECK_FALSE(b.approach_i);
  const auto files = files_under(dir);
  CHECK(files.contains(artifacts::kDatasets));
  CHECK(files.contains("data/training_2000N.csv"));
  CHECK_FALSE(files.contains(artifacts::kTrainingLog));
  CHECK_FALSE(files.contains(artifacts::kReduced));
  CHECK(verify_manifest(dir).empty());
  fs::remove_all(dir);
}

TEST_CASE("identical runs are byte-identical and the manifest checks out") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  PipelineOptions opt;
  opt.use_cache = false;
  const auto ra = run_pipeline(tiny(a), opt);
  const auto rb = run_pipeline(tiny(b), opt);
  CHECK(ra.completed == Stage::report);
  for (const char* f : {artifacts::kTrainingLog, artifacts::kEstimates, artifacts::kUq, artifacts::kSindy})
    CHECK(file_sha256(a / f) == file_sha256(b / f));
  CHECK(verify_manifest(a).empty());
  CHECK(ra.manifest.size() == files_under(a).size() - 1 - 2);  // manifest itself, two stage stamps

  write_text(a / artifacts::kEstimates, "{}");
  CHECK(verify_manifest(a) == std::vector<std::string>{artifacts::kEstimates});

  REQUIRE(ra.uq.size() == 5);
  for (const auto& f : ra.uq) CHECK(f.sample_count == 2);
  CHECK(ra.tip_relative_l2.size() == 3);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("cached stages are reused and invalidated by their inputs") {
  const auto dir = scratch("cache");
  auto cfg = tiny(dir);
  const auto first = run_pipeline(cfg);
  CHECK(first.cached.empty());
  const auto second = run_pipeline(cfg);
  CHECK(second.cached == std::vector<Stage>{Stage::simulate, Stage::identify});
  CHECK(second.approach_i->values == first.approach_i->values);
  CHECK(second.training_log.size() == first.training_log.size());

  cfg.sindy.threshold = 0.1;  // downstream of both cached stages
  CHECK(run_pipeline(cfg).cached.size() == 2);
  cfg.training.gamma = 0.5;
  CHECK(run_pipeline(cfg).cached == std::vector<Stage>{Stage::simulate});
  fs::remove_all(dir);
}

TEST_CASE("stage failures carry stage and config hash") {
  const auto dir = scratch("fail");
  auto cfg = tiny(dir);
  cfg.forcing.training_amplitude = 1e12;  // drives the training record to a non-finite state
  cfg.training.generator_learning_rate = 1.0;
  try {
    run_pipeline(cfg, PipelineOptions{.use_cache = false});
    FAIL("expected a stage failure");
  } catch (const StageError& e) {
    CHECK(e.config_hash() == config_hash(cfg));
    CHECK(std::string(e.what()).find(to_string(e.stage())) != std::string::npos);
  }
  CHECK_THROWS_AS(stage_from_string("train"), ConfigError);
  CHECK(stage_from_string("uq") == Stage::uq);
  fs::remove_all(dir);
}
