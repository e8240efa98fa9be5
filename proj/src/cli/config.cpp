#include "siva/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "siva/cli/io.hpp"

namespace siva::cli {

using nlohmann::json;

ConfigError::ConfigError(std::string field, const std::string& message)
    : std::invalid_argument(field.empty() ? message : fmt::format("{}: {}", field, message)),
      field_(std::move(field)) {}

namespace {

// Tracks which keys of one JSON object were consumed so leftovers can be
// reported as unknown or as carrying the wrong unit.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(std::string_view key) const {
    return path_.empty() ? std::string(key) : fmt::format("{}.{}", path_, key);
  }

  const json* take(std::string_view key) {
    known_.emplace_back(key);
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  void number(std::string_view key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
    }
  }

  template <class Int>
  void integer(std::string_view key, Int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0)
        throw ConfigError(field(key), "expected a non-negative integer");
      out = static_cast<Int>(v->get<unsigned long long>());
    }
  }

  void text(std::string_view key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void numbers(std::string_view key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) throw ConfigError(field(key), "expected an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }

  void sizes(std::string_view key, std::vector<std::size_t>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer() || e.get<long long>() <= 0)
          throw ConfigError(field(key), "expected an array of positive integers");
        out.push_back(e.get<std::size_t>());
      }
    }
  }

  Section sub(std::string_view key) {
    static const json empty = json::object();
    const json* v = take(key);
    return Section(v ? *v : empty, field(key));
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (std::ranges::find(known_, key) != known_.end()) continue;
      for (const auto& k : known_) {
        const auto cut = stem_length(k);
        if (cut != std::string::npos && key.size() > cut && key.compare(0, cut + 1, k, 0, cut + 1) == 0)
          throw ConfigError(field(key), fmt::format("unit suffix mismatch, expected '{}'", k));
      }
      throw ConfigError(field(key), "unknown key");
    }
  }

 private:
  // Position of the underscore that starts the unit suffix, if the key has one.
  static std::size_t stem_length(const std::string& key) {
    static constexpr std::string_view units[] = {"_pa", "_kg_per_m3", "_m", "_kg", "_n_per_m", "_n_per_m2",
                                                 "_n_per_m3", "_n_per_m4", "_n_per_m5", "_n", "_s", "_hz"};
    for (const auto u : units)
      if (key.size() > u.size() && key.ends_with(u)) return key.size() - u.size();
    return std::string::npos;
  }

  const json& j_;
  std::string path_;
  std::vector<std::string> known_;
};

constexpr const char* kAttachmentKeys[] = {"k1_n_per_m", "k2_n_per_m2", "k3_n_per_m3", "k4_n_per_m4",
                                           "k5_n_per_m5"};

void positive(double v, const std::string& field) {
  if (!(v > 0.0)) throw ConfigError(field, fmt::format("must be positive (got {})", v));
}

}  // namespace

void ExperimentConfig::validate() const {
  positive(beam.elastic_modulus, "beam.elastic_modulus_pa");
  positive(beam.density, "beam.density_kg_per_m3");
  positive(beam.length, "beam.length_m");
  positive(beam.width, "beam.width_m");
  positive(beam.thickness, "beam.thickness_m");
  if (beam.element_count < 1) throw ConfigError("beam.element_count", "must be at least 1");
  if (!(beam.tip_mass >= 0.0)) throw ConfigError("beam.tip_mass_kg", "must be non-negative");

  positive(forcing.training_amplitude, "forcing.training_amplitude_n");
  positive(forcing.pulse_duration, "forcing.pulse_duration_s");
  if (!(forcing.start_time >= 0.0)) throw ConfigError("forcing.start_time_s", "must be non-negative");
  if (forcing.validation_amplitudes.empty())
    throw ConfigError("forcing.validation_amplitudes_n", "at least one validation amplitude is required");
  for (double a : forcing.validation_amplitudes) {
    positive(a, "forcing.validation_amplitudes_n");
    if (a == forcing.training_amplitude)
      throw ConfigError("forcing.validation_amplitudes_n",
                        fmt::format("{} N is also the training amplitude", a));
  }
  positive(grid.duration, "grid.duration_s");
  positive(grid.sample_rate, "grid.sample_rate_hz");
  if (forcing.start_time + forcing.pulse_duration >= grid.duration)
    throw ConfigError("forcing.pulse_duration_s", "the impact must end inside the record");
  if (masters != "translational")
    throw ConfigError("reduction.masters", "only 'translational' is supported");

  try {
    training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  if (training.approach_ii_start_epoch > training.epochs)
    throw ConfigError("training.approach_ii_start_epoch", "exceeds training.epochs");
  if (approach_i_samples < 1) throw ConfigError("training.approach_i_samples", "must be at least 1");
  try {
    sindy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  positive(ode.rtol, "ode.rtol");
  positive(ode.atol, "ode.atol");
  positive(spectral.cwt_min_hz, "spectral.cwt_min_hz");
  if (!(spectral.cwt_max_hz > spectral.cwt_min_hz && spectral.cwt_max_hz < 0.5 * grid.sample_rate))
    throw ConfigError("spectral.cwt_max_hz", "must exceed cwt_min_hz and stay below the Nyquist frequency");
  if (spectral.cwt_points < 2) throw ConfigError("spectral.cwt_points", "must be at least 2");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

ExperimentConfig parse_config(std::string_view text) {
  json root;
  const auto trimmed = text.find_first_not_of(" \t\r\n");
  if (trimmed == std::string_view::npos) {
    root = json::object();
  } else {
    try {
      root = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("", fmt::format("invalid JSON: {}", e.what()));
    }
  }
  ExperimentConfig c;
  Section top(root, "");
  {
    auto s = top.sub("beam");
    s.number("elastic_modulus_pa", c.beam.elastic_modulus);
    s.number("density_kg_per_m3", c.beam.density);
    s.number("length_m", c.beam.length);
    s.number("width_m", c.beam.width);
    s.number("thickness_m", c.beam.thickness);
    s.integer("element_count", c.beam.element_count);
    s.number("tip_mass_kg", c.beam.tip_mass);
    s.finish();
  }
  {
    auto s = top.sub("attachment");
    for (std::size_t i = 0; i < 5; ++i) s.number(kAttachmentKeys[i], c.attachment.coefficients[i]);
    s.finish();
  }
  {
    auto s = top.sub("forcing");
    s.number("training_amplitude_n", c.forcing.training_amplitude);
    s.numbers("validation_amplitudes_n", c.forcing.validation_amplitudes);
    s.number("pulse_duration_s", c.forcing.pulse_duration);
    s.number("start_time_s", c.forcing.start_time);
    s.finish();
  }
  {
    auto s = top.sub("grid");
    s.number("duration_s", c.grid.duration);
    s.number("sample_rate_hz", c.grid.sample_rate);
    s.finish();
  }
  {
    auto s = top.sub("reduction");
    s.text("masters", c.masters);
    s.finish();
  }
  {
    auto s = top.sub("training");
    auto& t = c.training;
    s.integer("epochs", t.epochs);
    s.integer("batch_size", t.batch_size);
    s.number("gamma", t.gamma);
    s.number("generator_learning_rate", t.generator_learning_rate);
    s.number("discriminator_learning_rate", t.discriminator_learning_rate);
    s.integer("noise_dim", t.noise_dim);
    s.integer("approach_ii_start_epoch", t.approach_ii_start_epoch);
    s.sizes("generator_hidden", t.generator_hidden);
    s.sizes("discriminator_hidden", t.discriminator_hidden);
    s.number("collapse_loss", t.collapse_loss);
    s.integer("collapse_epochs", t.collapse_epochs);
    s.integer("approach_i_samples", c.approach_i_samples);
    std::string backend = "parallel";
    s.text("backend", backend);
    if (backend == "serial")
      t.backend = nn::kernels::Backend::serial;
    else if (backend != "parallel")
      throw ConfigError("training.backend", "expected 'serial' or 'parallel'");
    s.finish();
  }
  {
    auto s = top.sub("sindy");
    s.number("threshold", c.sindy.threshold);
    s.integer("max_iterations", c.sindy.max_iterations);
    s.finish();
  }
  {
    auto s = top.sub("ode");
    s.number("rtol", c.ode.rtol);
    s.number("atol", c.ode.atol);
    s.finish();
  }
  {
    auto s = top.sub("spectral");
    s.number("cwt_min_hz", c.spectral.cwt_min_hz);
    s.number("cwt_max_hz", c.spectral.cwt_max_hz);
    s.integer("cwt_points", c.spectral.cwt_points);
    s.finish();
  }
  std::string out = c.output_dir.string();
  top.text("output_dir", out);
  c.output_dir = out;
  top.integer("seed", c.seed);
  top.finish();

  c.training.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", fmt::format("cannot read config file {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["beam"] = {{"elastic_modulus_pa", c.beam.elastic_modulus},
               {"density_kg_per_m3", c.beam.density},
               {"length_m", c.beam.length},
               {"width_m", c.beam.width},
               {"thickness_m", c.beam.thickness},
               {"element_count", c.beam.element_count},
               {"tip_mass_kg", c.beam.tip_mass}};
  for (std::size_t i = 0; i < 5; ++i) j["attachment"][kAttachmentKeys[i]] = c.attachment.coefficients[i];
  j["forcing"] = {{"training_amplitude_n", c.forcing.training_amplitude},
                  {"validation_amplitudes_n", c.forcing.validation_amplitudes},
                  {"pulse_duration_s", c.forcing.pulse_duration},
                  {"start_time_s", c.forcing.start_time}};
  j["grid"] = {{"duration_s", c.grid.duration}, {"sample_rate_hz", c.grid.sample_rate}};
  j["reduction"] = {{"masters", c.masters}};
  const auto& t = c.training;
  j["training"] = {{"epochs", t.epochs},
                   {"batch_size", t.batch_size},
                   {"gamma", t.gamma},
                   {"generator_learning_rate", t.generator_learning_rate},
                   {"discriminator_learning_rate", t.discriminator_learning_rate},
                   {"noise_dim", t.noise_dim},
                   {"approach_ii_start_epoch", t.approach_ii_start_epoch},
                   {"generator_hidden", t.generator_hidden},
                   {"discriminator_hidden", t.discriminator_hidden},
                   {"collapse_loss", t.collapse_loss},
                   {"collapse_epochs", t.collapse_epochs},
                   {"approach_i_samples", c.approach_i_samples},
                   {"backend", t.backend == nn::kernels::Backend::serial ? "serial" : "parallel"}};
  j["sindy"] = {{"threshold", c.sindy.threshold}, {"max_iterations", c.sindy.max_iterations}};
  j["ode"] = {{"rtol", c.ode.rtol}, {"atol", c.ode.atol}};
  j["spectral"] = {{"cwt_min_hz", c.spectral.cwt_min_hz},
                   {"cwt_max_hz", c.spectral.cwt_max_hz},
                   {"cwt_points", c.spectral.cwt_points}};
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  return j;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_json(a) == to_json(b); }

std::string config_hash(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

}  // namespace siva::cli
