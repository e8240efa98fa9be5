#include "siva/cli/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "siva/beam/beam_model.hpp"
#include "siva/cli/io.hpp"
#include "siva/nn/checkpoint.hpp"
#include "siva/numerics/linalg.hpp"
#include "siva/reduction/guyan.hpp"
#include "siva/sindy/sindy.hpp"
#include "siva/spectral/metrics.hpp"
#include "siva/spectral/spectral.hpp"

namespace siva::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using num::DenseMatrix;
using num::Vector;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::build: return "build";
    case Stage::simulate: return "simulate";
    case Stage::reduce: return "reduce";
    case Stage::identify: return "identify";
    case Stage::baseline: return "baseline";
    case Stage::uq: return "uq";
    case Stage::report: return "report";
  }
  return "?";
}

Stage stage_from_string(std::string_view name) {
  for (const Stage s : kAllStages)
    if (to_string(s) == name) return s;
  throw ConfigError("stage", fmt::format("unknown stage '{}'", name));
}

StageError::StageError(Stage stage, std::string config_hash, std::string last_artifact,
                       const std::string& cause)
    : std::runtime_error(fmt::format("stage {} failed (config {}, last artifact {}): {}", to_string(stage),
                                     config_hash.substr(0, 12),
                                     last_artifact.empty() ? "none" : last_artifact, cause)),
      stage_(stage),
      config_hash_(std::move(config_hash)),
      last_artifact_(std::move(last_artifact)) {}

namespace {

json to_json(const ident::ParameterVector& p) { return json(std::vector<double>(p.k.begin(), p.k.end())); }

json to_json(const ident::ParameterEstimate& e) {
  json j{{"method", ident::to_string(e.method)},
         {"values", to_json(e.values)},
         {"sample_count", e.sample_count},
         {"mean", to_json(e.mean)},
         {"stddev", to_json(e.stddev)}};
  if (e.mse) j["tip_mse_m2"] = std::isfinite(*e.mse) ? json(*e.mse) : json(nullptr);
  if (!e.failure.empty()) j["failure"] = e.failure;
  return j;
}

double relative_l2(std::span<const double> exact, std::span<const double> approx) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    num += (exact[i] - approx[i]) * (exact[i] - approx[i]);
    den += exact[i] * exact[i];
  }
  return std::sqrt(num / den);
}

const std::vector<std::string> kLogHeader{"epoch", "L_D", "L_adv", "L_MSE", "L_P", "k1", "k2", "k3", "k4", "k5"};

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& config, const PipelineOptions& options)
      : cfg_(config), opt_(options), out_(config.output_dir) {
    cfg_.training.seed = cfg_.seed;
    cfg_.validate();
    bundle_.config_hash = config_hash(cfg_);
    bundle_.seed = cfg_.seed;
  }

  ReportBundle run() {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_);
    write(artifacts::kConfig, [&](const fs::path& p) { write_json(p, cli::to_json(cfg_)); });
    for (const Stage s : kAllStages) {
      try {
        run_stage(s);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(s, bundle_.config_hash, last_artifact_, e.what());
      }
      bundle_.completed = s;
      if (s == opt_.stop_after) break;
    }
    bundle_.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (bundle_.completed == Stage::report) write_report();
    write_manifest();
    return std::move(bundle_);
  }

 private:
  void log(std::string_view msg) const {
    if (opt_.log) opt_.log(msg);
  }

  void warn(std::string msg) {
    log(fmt::format("warning: {}", msg));
    bundle_.warnings.push_back(std::move(msg));
  }

  template <class F>
  void write(const std::string& rel, F&& writer) {
    writer(out_ / rel);
    last_artifact_ = rel;
    written_.insert(rel);
  }

  void run_stage(Stage s) {
    switch (s) {
      case Stage::build: return build();
      case Stage::simulate: return simulate();
      case Stage::reduce: return reduce();
      case Stage::identify: return identify();
      case Stage::baseline: return baseline();
      case Stage::uq: return quantify();
      case Stage::report: return report();
    }
  }

  // --- caching -------------------------------------------------------------

  json stage_inputs(Stage s) const {
    const auto c = cli::to_json(cfg_);
    json j{{"beam", c["beam"]}, {"attachment", c["attachment"]}, {"forcing", c["forcing"]},
           {"grid", c["grid"]}, {"ode", c["ode"]}};
    if (s == Stage::identify) {
      j["reduction"] = c["reduction"];
      j["training"] = c["training"];
      j["seed"] = c["seed"];
    }
    return j;
  }

  fs::path stamp_path(Stage s) const { return out_ / "stages" / (to_string(s) + ".json"); }

  bool cached(Stage s) const {
    if (!opt_.use_cache || !fs::exists(stamp_path(s))) return false;
    try {
      const auto stamp = read_json(stamp_path(s));
      if (stamp.at("inputs_sha256") != sha256_hex(stage_inputs(s).dump())) return false;
      for (const auto& [rel, sha] : stamp.at("artifacts").items())
        if (!fs::exists(out_ / rel) || file_sha256(out_ / rel) != sha.get<std::string>()) return false;
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }

  void stamp(Stage s, const std::vector<std::string>& files) {
    json a = json::object();
    for (const auto& f : files) a[f] = file_sha256(out_ / f);
    write_json(stamp_path(s), {{"inputs_sha256", sha256_hex(stage_inputs(s).dump())}, {"artifacts", a}});
  }

  void reuse(Stage s) {
    const auto stamp = read_json(stamp_path(s));
    for (const auto& [rel, _] : stamp.at("artifacts").items()) written_.insert(rel);
    bundle_.cached.push_back(s);
    log(fmt::format("{}: reusing cached outputs", to_string(s)));
  }

  // --- stages --------------------------------------------------------------

  void build() {
    model_ = beam::build_full_model(cfg_.beam);
    modal_ = beam::modal_analysis(model_);
    damping_ = beam::build_damping(model_, modal_.frequencies_hz, beam::reference_damping_ratios(),
                                   modal_.shapes);
    const auto ratios = beam::extend_damping_ratios(beam::reference_damping_ratios(),
                                                    modal_.frequencies_hz.size());
    write(artifacts::kModal, [&](const fs::path& p) {
      write_json(p, {{"dof_count", model_.dof_count()},
                     {"frequencies_hz", modal_.frequencies_hz},
                     {"damping_ratios", ratios}});
    });
    log(fmt::format("build: {} DOFs, f1 = {:.4g} Hz", model_.dof_count(), modal_.frequencies_hz[0]));
  }

  static std::string dataset_file(const sim::TrajectorySet& s) { return fmt::format("data/{}.csv", s.label()); }

  void simulate() {
    if (cached(Stage::simulate)) {
      const auto meta = read_json(out_ / artifacts::kDatasets);
      data_.training = read_trajectory(out_ / meta.at("training").at("file").get<std::string>(),
                                       meta.at("training"));
      data_.validation.clear();
      for (const auto& v : meta.at("validation"))
        data_.validation.push_back(read_trajectory(out_ / v.at("file").get<std::string>(), v));
      reuse(Stage::simulate);
      return;
    }
    data_ = sim::make_datasets(model_, damping_, cfg_.attachment, cfg_.forcing, cfg_.grid, cfg_.ode);
    std::vector<std::string> files;
    json meta;
    auto emit = [&](const sim::TrajectorySet& s) {
      const auto rel = dataset_file(s);
      write(rel, [&](const fs::path& p) { write_trajectory(p, s); });
      files.push_back(rel);
      auto m = trajectory_metadata(s);
      m["file"] = rel;
      return m;
    };
    meta["training"] = emit(data_.training);
    meta["validation"] = json::array();
    for (const auto& v : data_.validation) meta["validation"].push_back(emit(v));
    write(artifacts::kDatasets, [&](const fs::path& p) { write_json(p, meta); });
    files.push_back(artifacts::kDatasets);
    stamp(Stage::simulate, files);
    log(fmt::format("simulate: {} samples per record, {} validation records", data_.training.sample_count(),
                    data_.validation.size()));
  }

  void reduce() {
    reduced_ = reduction::guyan_reduce(model_, damping_, reduction::select_translational(model_));
    const auto eig = num::eig_sym_generalized(reduced_.stiffness, reduced_.mass);
    Vector freqs;
    for (double w2 : eig.values) freqs.push_back(std::sqrt(std::max(w2, 0.0)) / (2.0 * std::numbers::pi));
    auto rows = [](const DenseMatrix& m) {
      json j = json::array();
      for (std::size_t r = 0; r < m.rows(); ++r)
        j.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
      return j;
    };
    write(artifacts::kReduced, [&](const fs::path& p) {
      write_json(p, {{"master_dofs", reduced_.master_dofs},
                     {"tip_index", reduced_.tip_index},
                     {"frequencies_hz", freqs},
                     {"mass", rows(reduced_.mass)},
                     {"damping", rows(reduced_.damping)},
                     {"stiffness", rows(reduced_.stiffness)}});
    });
    log(fmt::format("reduce: {} master DOFs", reduced_.dim()));
  }

  void identify() {
    if (cached(Stage::identify)) {
      state_.config = cfg_.training;
      state_.generator = nn::mlp_from_json(read_json(out_ / artifacts::kGenerator).at("network"));
      const auto table = read_csv(out_ / artifacts::kTrainingLog);
      for (std::size_t r = 0; r < table.rows.rows(); ++r) {
        const auto row = table.rows.row(r);
        ident::EpochRecord e;
        e.epoch = static_cast<std::size_t>(row[0]);
        e.loss_d = row[1];
        e.loss_adv = row[2];
        e.loss_mse = row[3];
        e.loss_p = row[4];
        std::copy(row.begin() + 5, row.end(), e.lambda.k.begin());
        state_.history.push_back(e);
      }
      reuse(Stage::identify);
    } else {
      ident::Trainer trainer(cfg_.training, reduced_, data_.training, data_.validation);
      ident::TrainingObserver obs;
      obs.on_epoch = [&](const ident::EpochRecord& r) {
        if (opt_.progress_every && (r.epoch % opt_.progress_every == 0 || r.epoch == 1))
          log(fmt::format("identify: epoch {:4d}  L_D {:.4f}  L_adv {:.4f}  L_MSE {:.4g}  k1 {:.4g}  k3 {:.4g}",
                          r.epoch, r.loss_d, r.loss_adv, r.loss_mse, r.lambda[0], r.lambda[2]));
      };
      obs.on_warning = [&](std::string_view w) { warn(std::string(w)); };
      try {
        trainer.run(obs);
      } catch (const ident::TrainingError& e) {
        write(artifacts::kGenerator, [&](const fs::path& p) {
          write_json(p, {{"network", nn::to_json(e.last_good().generator)}, {"epoch", e.epoch() - 1}});
        });
        throw;
      }
      state_ = trainer.state();
      DenseMatrix log_rows(state_.history.size(), kLogHeader.size());
      for (std::size_t i = 0; i < state_.history.size(); ++i) {
        const auto& e = state_.history[i];
        auto row = log_rows.row(i);
        row[0] = static_cast<double>(e.epoch);
        row[1] = e.loss_d;
        row[2] = e.loss_adv;
        row[3] = e.loss_mse;
        row[4] = e.loss_p;
        std::ranges::copy(e.lambda.k, row.begin() + 5);
      }
      write(artifacts::kTrainingLog, [&](const fs::path& p) { write_csv(p, kLogHeader, log_rows); });
      write(artifacts::kGenerator, [&](const fs::path& p) {
        write_json(p, {{"network", nn::to_json(state_.generator)}, {"epoch", state_.completed_epochs()}});
      });
      stamp(Stage::identify, {artifacts::kTrainingLog, artifacts::kGenerator});
    }
    bundle_.training_log = state_.history;
    bundle_.approach_i = ident::approach_I(state_, cfg_.approach_i_samples);
    bundle_.approach_ii = ident::approach_II(state_, cfg_.training.approach_ii_start_epoch);
    write(artifacts::kEstimates, [&](const fs::path& p) {
      write_json(p, {{"approach_i", to_json(*bundle_.approach_i)}, {"approach_ii", to_json(*bundle_.approach_ii)}});
    });
    const auto& v = bundle_.approach_i->values;
    log(fmt::format("identify: approach I k = [{:.5g}, {:.5g}, {:.5g}, {:.5g}, {:.5g}]", v[0], v[1], v[2], v[3],
                    v[4]));
  }

  void baseline() {
    const auto fit = sindy::fit_attachment(reduced_, data_.training, cfg_.sindy);
    for (const auto& w : fit.regression.warnings) warn(fmt::format("sindy: {}", w));
    bundle_.sindy_coefficients.clear();
    json coeffs = json::object();
    for (std::size_t j = 0; j < fit.library.column_count(); ++j) {
      bundle_.sindy_coefficients.push_back({fit.library.labels[j], fit.regression.coefficients[j]});
      coeffs[fit.library.labels[j]] = fit.regression.coefficients[j];
    }
    bundle_.sindy = ident::ParameterEstimate::point(fit.lambda, ident::EstimateMethod::sindy);
    write(artifacts::kSindy, [&](const fs::path& p) {
      write_json(p, {{"threshold", cfg_.sindy.threshold},
                     {"rows_used", fit.rows_used},
                     {"iterations", fit.regression.iterations},
                     {"converged", fit.regression.converged},
                     {"active_terms", fit.regression.active_count()},
                     {"coefficients", coeffs},
                     {"attachment", to_json(fit.lambda)},
                     {"warnings", fit.regression.warnings}});
    });

    std::vector<ident::ParameterEstimate> candidates{*bundle_.approach_i, *bundle_.approach_ii, *bundle_.sindy};
    bundle_.best = ident::select_best(candidates, reduced_, data_.training, cfg_.ode);
    bundle_.approach_i = candidates[0];
    bundle_.approach_ii = candidates[1];
    bundle_.sindy = candidates[2];
    for (const auto& c : candidates)
      if (!c.failure.empty()) warn(fmt::format("{} resimulation failed: {}", ident::to_string(c.method), c.failure));
    write(artifacts::kComparison, [&](const fs::path& p) {
      json list = json::array();
      for (const auto& c : candidates) list.push_back(to_json(c));
      write_json(p, {{"reference", data_.training.label()},
                     {"candidates", list},
                     {"best", ident::to_string(bundle_.best->method)}});
    });
    log(fmt::format("baseline: tip MSE approach I {:.3e}, approach II {:.3e}, SINDy {:.3e} m^2",
                    *candidates[0].mse, *candidates[1].mse, *candidates[2].mse));
  }

  void quantify() {
    const std::size_t start = cfg_.training.approach_ii_start_epoch;
    bundle_.uq.clear();
    json report = json::object();
    for (std::size_t i = 0; i < ident::kParameterCount; ++i) {
      Vector samples;
      for (const auto& e : state_.history)
        if (e.epoch >= start) samples.push_back(e.lambda[i]);
      const auto label = fmt::format("k{}", i + 1);
      auto fit = uq::fit_normal(samples, label);
      const auto pdf_file = fmt::format("uq/pdf_{}.csv", label);
      DenseMatrix grid(fit.pdf_x.size(), 2);
      for (std::size_t r = 0; r < fit.pdf_x.size(); ++r) {
        grid(r, 0) = fit.pdf_x[r];
        grid(r, 1) = fit.pdf[r];
      }
      write(pdf_file, [&](const fs::path& p) { write_csv(p, std::vector<std::string>{"value", "density"}, grid); });
      report[label] = {{"mean", fit.mean},           {"stddev", fit.stddev},
                       {"ci95", {fit.ci95.first, fit.ci95.second}},
                       {"sample_count", fit.sample_count},
                       {"degenerate", fit.degenerate}, {"pdf_grid", pdf_file}};
      bundle_.uq.push_back(std::move(fit));
    }
    write(artifacts::kUq, [&](const fs::path& p) { write_json(p, report); });
    log(fmt::format("uq: k1 ci95 [{:.5g}, {:.5g}], k3 ci95 [{:.5g}, {:.5g}]", bundle_.uq[0].ci95.first,
                    bundle_.uq[0].ci95.second, bundle_.uq[2].ci95.first, bundle_.uq[2].ci95.second));
  }

  void report() {
    const auto& est = *bundle_.approach_i;
    const auto tip_exact = data_.training.tip_displacement();
    bundle_.tip_peak = num::norm_inf(tip_exact);
    const auto grid = spectral::log_frequency_grid(cfg_.spectral.cwt_min_hz, cfg_.spectral.cwt_max_hz,
                                                   cfg_.spectral.cwt_points);
    std::vector<const sim::TrajectorySet*> records{&data_.training};
    for (const auto& v : data_.validation) records.push_back(&v);
    for (const auto* rec : records) {
      const auto sim = ident::resimulate(reduced_, est.values, *rec, cfg_.ode);
      const auto exact = rec->tip_displacement(), approx = sim.tip_displacement();
      bundle_.tip_relative_l2[rec->label()] = relative_l2(exact, approx);
      DenseMatrix rows(exact.size(), 3);
      for (std::size_t r = 0; r < exact.size(); ++r) {
        rows(r, 0) = rec->times[r];
        rows(r, 1) = exact[r];
        rows(r, 2) = approx[r];
      }
      const auto base = fmt::format("report/{}", rec->label());
      write(base + "_tip.csv", [&](const fs::path& p) {
        write_csv(p, std::vector<std::string>{"t_s", "exact_m", "identified_m"}, rows);
      });
      for (const auto& [tag, signal] : {std::pair{"exact", &exact}, std::pair{"identified", &approx}}) {
        const auto spec = spectral::fft_spectrum(*signal, cfg_.grid.sample_rate);
        DenseMatrix s(spec.frequencies.size(), 2);
        for (std::size_t k = 0; k < spec.frequencies.size(); ++k) {
          s(k, 0) = spec.frequencies[k];
          s(k, 1) = spec.magnitudes[k];
        }
        write(fmt::format("{}_{}_spectrum.csv", base, tag), [&](const fs::path& p) {
          write_csv(p, std::vector<std::string>{"freq_hz", "magnitude"}, s);
        });
        write_scalogram(fmt::format("{}_{}_cwt.csv", base, tag),
                        spectral::cwt_morlet(*signal, cfg_.grid.sample_rate, grid));
      }
    }
    for (const auto& [label, err] : bundle_.tip_relative_l2)
      log(fmt::format("report: {} tip relative L2 error {:.3e}", label, err));
  }

  // Every `stride`-th time sample; rows are frequencies.
  void write_scalogram(const std::string& rel, const spectral::Scalogram& sc) {
    const std::size_t stride = 10, cols = (sc.times.size() + stride - 1) / stride;
    std::vector<std::string> header{"freq_hz\\t_s"};
    for (std::size_t c = 0; c < cols; ++c) header.push_back(format_number(sc.times[c * stride]));
    DenseMatrix m(sc.frequencies.size(), cols + 1);
    for (std::size_t f = 0; f < sc.frequencies.size(); ++f) {
      m(f, 0) = sc.frequencies[f];
      for (std::size_t c = 0; c < cols; ++c) m(f, c + 1) = sc.magnitudes(f, c * stride);
    }
    write(rel, [&](const fs::path& p) { write_csv(p, header, m); });
  }

  void write_report() {
    json est = json::object();
    for (const auto* e : {&bundle_.approach_i, &bundle_.approach_ii, &bundle_.sindy, &bundle_.best})
      if (*e) est[e == &bundle_.best ? "best_by_simulation" : ident::to_string((*e)->method)] = to_json(**e);
    write(artifacts::kReport, [&](const fs::path& p) {
      write_json(p, {{"config_sha256", bundle_.config_hash},
                     {"seed", bundle_.seed},
                     {"epochs", bundle_.training_log.size()},
                     {"estimates", est},
                     {"tip_peak_m", bundle_.tip_peak},
                     {"tip_relative_l2", bundle_.tip_relative_l2},
                     {"warnings", bundle_.warnings},
                     {"cached_stages", [&] {
                        std::vector<std::string> s;
                        for (Stage c : bundle_.cached) s.push_back(to_string(c));
                        return s;
                      }()},
                     {"runtime_s", bundle_.runtime_s}});
    });
  }

  void write_manifest() {
    json files = json::array();
    bundle_.manifest.clear();
    for (const auto& rel : written_) {
      ManifestEntry e{rel, file_sha256(out_ / rel), fs::file_size(out_ / rel)};
      files.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
      bundle_.manifest.push_back(std::move(e));
    }
    write_json(out_ / artifacts::kManifest, {{"config_sha256", bundle_.config_hash},
                                             {"completed_stage", to_string(bundle_.completed)},
                                             {"files", files}});
  }

  ExperimentConfig cfg_;
  PipelineOptions opt_;
  fs::path out_;
  std::string last_artifact_;
  std::set<std::string> written_;
  ReportBundle bundle_;

  beam::FullModel model_;
  beam::ModalData modal_;
  DenseMatrix damping_;
  sim::DatasetBundle data_;
  reduction::ReducedModel reduced_;
  ident::TrainingState state_;
};

}  // namespace

ReportBundle run_pipeline(const ExperimentConfig& config, const PipelineOptions& options) {
  return Pipeline(config, options).run();
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
  std::vector<std::string> bad;
  const auto m = read_json(dir / artifacts::kManifest);
  for (const auto& f : m.at("files")) {
    const auto rel = f.at("path").get<std::string>();
    if (!fs::exists(dir / rel) || file_sha256(dir / rel) != f.at("sha256").get<std::string>()) bad.push_back(rel);
  }
  return bad;
}

}  // namespace siva::cli
