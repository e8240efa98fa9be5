// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "siva/beam/beam_model.hpp"
#include "siva/cli/config.hpp"
#include "siva/cli/io.hpp"
#include "siva/cli/pipeline.hpp"
#include "siva/identify/trainer.hpp"
#include "siva/nn/mlp.hpp"
#include "siva/numerics/linalg.hpp"
#include "siva/numerics/ode.hpp"
#include "siva/reduction/guyan.hpp"

using namespace siva;
namespace fs = std::filesystem;
using num::DenseMatrix;
using num::Vector;

namespace {

constexpr double kK1 = 1.1e4, kK3 = 1e8;
constexpr double kReferenceHz[] = {2.079, 13.05, 36.61, 71.86, 119.0, 178.1, 249.4};

struct Outcome {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Outcome> outcomes;

void report(int id, std::string name, bool pass, std::string detail) {
  fmt::print("{} {:>2} {:<28} {}\n", pass ? "PASS" : "FAIL", id, name, detail);
  std::fflush(stdout);
  outcomes.push_back({id, std::move(name), pass, std::move(detail)});
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct Bench {
  beam::FullModel model;
  beam::ModalData modal;
  DenseMatrix damping;
  reduction::ReducedModel reduced;
};

Bench make_bench() {
  Bench b;
  b.model = beam::build_full_model(beam::BeamSpec{});
  b.modal = beam::modal_analysis(b.model);
  b.damping = beam::build_damping(b.model, b.modal.frequencies_hz, beam::reference_damping_ratios(),
                                  b.modal.shapes);
  b.reduced = reduction::guyan_reduce(b.model, b.damping, reduction::select_translational(b.model));
  return b;
}

void modal_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = beam::build_full_model(beam::BeamSpec{});
  const auto modal = beam::modal_analysis(model);
  const double dt = seconds_since(t0);
  double worst = 0.0;
  for (std::size_t i = 0; i < 7; ++i)
    worst = std::max(worst, std::abs(modal.frequencies_hz[i] - kReferenceHz[i]) / kReferenceHz[i]);
  report(1, "modal fidelity", worst <= 0.02 && dt < 1.0,
         fmt::format("worst deviation {:.3f}% (<= 2%), {:.3f} s", 100 * worst, dt));
}

void reduction_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto b = make_bench();
  const auto eig = num::eig_sym_generalized(b.reduced.stiffness, b.reduced.mass);
  bool above = true;
  double worst = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const double f = std::sqrt(eig.values[i]) / (2 * std::numbers::pi);
    above = above && f >= b.modal.frequencies_hz[i] * (1 - 1e-12);
    worst = std::max(worst, (f - b.modal.frequencies_hz[i]) / b.modal.frequencies_hz[i]);
  }
  for (std::size_t i = 5; i < b.reduced.dim(); ++i)
    above = above && std::sqrt(eig.values[i]) / (2 * std::numbers::pi) >= b.modal.frequencies_hz[i] * (1 - 1e-12);

  const auto& masters = b.reduced.master_dofs;
  DenseMatrix f_full(b.model.dof_count(), 1), f_red(b.reduced.dim(), 1);
  f_full(b.model.tip_translation(), 0) = 100.0;
  f_red(b.reduced.tip_index, 0) = 100.0;
  const auto u_full = num::solve_linear(b.model.stiffness, f_full);
  const auto u_red = num::solve_linear(b.reduced.stiffness, f_red);
  double cond = 0.0;
  for (std::size_t i = 0; i < masters.size(); ++i)
    cond = std::max(cond, std::abs(u_red(i, 0) - u_full(masters[i], 0)) /
                              std::abs(u_full(b.model.tip_translation(), 0)));
  const double dt = seconds_since(t0);
  report(2, "reduction fidelity", above && worst <= 0.01 && cond <= 1e-9 && dt < 1.0,
         fmt::format("reduced >= full: {}, modes 1-5 worst {:.4f}% (<= 1%), static tip load {:.1e} (<= 1e-9), {:.3f} s",
                     above ? "yes" : "no", 100 * worst, cond, dt));
}

void integrator_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const num::OdeOptions tol{.rtol = 1e-8, .atol = 1e-8};
  const auto grid = num::uniform_grid(0.0, 10.0, 100.0);

  const num::OdeRhs decay = [](double, std::span<const double> y, std::span<double> d) { d[0] = -y[0]; };
  // Two time constants: beyond that atol, not rtol, bounds the relative error.
  const auto short_grid = num::uniform_grid(0.0, 2.0, 100.0);
  const auto sd = num::integrate_rk45(decay, Vector{1.0}, 0.0, 2.0, short_grid, tol);
  double e_decay = 0.0;
  for (std::size_t r = 0; r < short_grid.size(); ++r) e_decay = std::max(e_decay, rel(sd.states(r, 0), std::exp(-short_grid[r]), 0.0));

  const double m = 1.0, c = 0.2, k = 4.0, wn = std::sqrt(k / m), zeta = c / (2 * std::sqrt(k * m));
  const double wd = wn * std::sqrt(1 - zeta * zeta);
  const num::OdeRhs sdof = [&](double, std::span<const double> y, std::span<double> d) {
    d[0] = y[1];
    d[1] = -(c * y[1] + k * y[0]) / m;
  };
  const auto so = num::integrate_rk45(sdof, Vector{1.0, 0.0}, 0.0, 10.0, grid, tol);
  // Relative to the envelope, since the response itself crosses zero.
  double e_sdof = 0.0;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const double t = grid[r], env = std::exp(-zeta * wn * t);
    const double x = env * (std::cos(wd * t) + zeta * wn / wd * std::sin(wd * t));
    e_sdof = std::max(e_sdof, std::abs(so.states(r, 0) - x) / env);
  }
  const double dt = seconds_since(t0);
  report(3, "integrator oracle", e_decay <= 1e-6 && e_sdof <= 1e-6 && dt < 1.0,
         fmt::format("decay {:.1e}, damped SDOF {:.1e} (<= 1e-6), {:.3f} s", e_decay, e_sdof, dt));
}

void gradient_suite(const Bench& b) {
  const auto t0 = std::chrono::steady_clock::now();
  nn::RngStream rng(11);

  // network backward against central differences of a weighted output sum
  double worst_nn = 0.0;
  for (const auto& [sizes, act] : {std::pair{std::vector<std::size_t>{16, 64, 32, 16, 10}, nn::Activation::linear},
                                   std::pair{std::vector<std::size_t>{15, 64, 32, 1}, nn::Activation::sigmoid}}) {
    auto net = nn::init_mlp(sizes, act, rng);
    DenseMatrix x(7, sizes.front());
    rng.fill_normal(x.data());
    const auto fr = nn::forward(net, x);
    DenseMatrix w(fr.outputs.rows(), fr.outputs.cols());
    rng.fill_normal(w.data());
    const auto g = nn::backward(net, fr.cache, w);
    auto objective = [&] {
      const auto y = nn::predict(net, x);
      return std::inner_product(y.data().begin(), y.data().end(), w.data().begin(), 0.0);
    };
    for (int pick = 0; pick < 60; ++pick) {
      const std::size_t i = rng.below(net.parameter_count());
      const double p0 = net.parameters()[i], h = 1e-6;
      net.parameters()[i] = p0 + h;
      const double up = objective();
      net.parameters()[i] = p0 - h;
      const double dn = objective();
      net.parameters()[i] = p0;
      const double fd = (up - dn) / (2 * h);
      if (std::abs(fd) < 1e-9 && std::abs(g.parameters[i]) < 1e-9) continue;
      worst_nn = std::max(worst_nn, rel(fd, g.parameters[i], 0.0));
    }
  }

  // generator -> physics layer -> L_MSE on a frozen noise and time batch
  sim::GridSpec grid;
  grid.duration = 0.5;
  const auto data = sim::make_datasets(b.model, b.damping, sim::AttachmentSpec::linear_cubic(kK1, kK3),
                                       sim::DatasetPlan{}, grid);
  ident::TrainingConfig cfg;
  cfg.batch_size = 100;
  ident::Trainer tr(cfg, b.reduced, data.training, data.validation);
  nn::RngStream grng(77);
  auto gen = nn::init_mlp({16, 64, 32, 16, 10}, nn::Activation::linear, grng);
  for (double& w : gen.weights(3)) w *= 0.05;
  const double a[] = {1.0, 0.5, 0.9, 0.3, -0.2}, e[] = {4.0, 5.0, 8.0, 9.0, 10.0};
  for (std::size_t i = 0; i < 5; ++i) {
    gen.biases(3)[2 * i] = a[i];
    gen.biases(3)[2 * i + 1] = e[i];
  }
  DenseMatrix z(6, 16);
  grng.fill_normal(z.data());
  std::vector<std::size_t> idx(80);
  for (auto& i : idx) i = grng.below(tr.training_data().sample_count());
  Vector grad;
  tr.generator_mse_gradient(gen, z, idx, &grad);
  double worst_e2e = 0.0;
  for (int pick = 0; pick < 30; ++pick) {
    const std::size_t p = grng.below(gen.parameter_count());
    auto probe = gen;
    const double p0 = probe.parameters()[p], h = 1e-6 * std::max(1.0, std::abs(p0));
    probe.parameters()[p] = p0 + h;
    const double up = tr.generator_mse_gradient(probe, z, idx, nullptr);
    probe.parameters()[p] = p0 - h;
    const double dn = tr.generator_mse_gradient(probe, z, idx, nullptr);
    const double fd = (up - dn) / (2 * h);
    if (std::abs(fd) < 1e-6 && std::abs(grad[p]) < 1e-6) continue;
    worst_e2e = std::max(worst_e2e, rel(fd, grad[p], 1e-6));
  }
  const double dt = seconds_since(t0);
  report(4, "gradient suite", worst_nn <= 1e-5 && worst_e2e <= 1e-4 && dt < 10.0,
         fmt::format("network {:.1e} (<= 1e-5), end-to-end {:.1e} (<= 1e-4), {:.2f} s", worst_nn, worst_e2e, dt));
}

struct SeedRun {
  std::uint64_t seed;
  cli::ReportBundle bundle;
  double seconds;
};

cli::ReportBundle run(cli::ExperimentConfig cfg, const fs::path& out, cli::Stage stop, bool reuse) {
  cfg.output_dir = out;
  cli::PipelineOptions opt;
  opt.stop_after = stop;
  opt.use_cache = reuse;
  opt.progress_every = 100;
  opt.log = [&](std::string_view m) {
    if (m.starts_with("identify: epoch") || m.starts_with("warning")) fmt::print(stderr, "  [{}] {}\n", out.filename().string(), m);
  };
  return cli::run_pipeline(cfg, opt);
}

std::string signed_pct(double v, double truth) { return fmt::format("{:+.2f}%", 100 * (v - truth) / truth); }

bool accurate(const ident::ParameterVector& k, double q, double tol, std::string& detail) {
  const double e1 = std::abs(k[0] - kK1) / kK1, e3 = std::abs(k[2] - kK3) / kK3;
  const double main = std::abs(k[0] * q + k[2] * q * q * q);
  const double r2 = std::abs(k[1] * q * q) / main, r4 = std::abs(k[3] * std::pow(q, 4)) / main,
               r5 = std::abs(k[4] * std::pow(q, 5)) / main;
  detail = fmt::format("k1 {}, k3 {}, spurious {:.2f}/{:.2f}/{:.2f}%", signed_pct(k[0], kK1), signed_pct(k[2], kK3),
                       100 * r2, 100 * r4, 100 * r5);
  return e1 <= tol && e3 <= tol && r2 < 0.01 && r4 < 0.01 && r5 < 0.01;
}

template <class F>
std::string joined(const std::vector<SeedRun>& runs, F&& f) {
  std::string s;
  for (const auto& r : runs) s += fmt::format("{}seed {}: {}", s.empty() ? "" : "; ", r.seed, f(r));
  return s;
}

double trailing_mean(const std::vector<ident::EpochRecord>& log, double ident::EpochRecord::*field, std::size_t n) {
  const std::size_t from = log.size() > n ? log.size() - n : 0;
  double s = 0.0;
  for (std::size_t i = from; i < log.size(); ++i) s += log[i].*field;
  return s / static_cast<double>(log.size() - from);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  fs::path out = fs::temp_directory_path() / "siva-acceptance";
  std::vector<std::uint64_t> seeds{42, 43, 44};
  std::size_t epochs = 1000, smoke_epochs = 300, determinism_epochs = 50;
  bool reuse = false;
  app.add_option("--out", out, "Working directory");
  app.add_option("--seeds", seeds, "Training seeds")->delimiter(',');
  app.add_option("--epochs", epochs, "Full-profile epochs");
  app.add_option("--smoke-epochs", smoke_epochs, "Smoke-profile epochs");
  app.add_option("--determinism-epochs", determinism_epochs, "Epochs of each determinism run");
  app.add_flag("--reuse", reuse, "Reuse cached simulate/identify outputs from an earlier run");
  CLI11_PARSE(app, argc, argv);

  modal_fidelity();
  reduction_fidelity();
  integrator_oracle();
  const auto bench = make_bench();
  gradient_suite(bench);

  cli::ExperimentConfig base = cli::parse_config("{}");
  base.training.epochs = epochs;
  if (epochs < base.training.approach_ii_start_epoch) base.training.approach_ii_start_epoch = epochs / 2 + 1;

  std::vector<SeedRun> runs;
  for (const auto seed : seeds) {
    auto cfg = base;
    cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    auto b = run(cfg, out / fmt::format("seed{}", seed), cli::Stage::report, reuse);
    runs.push_back({seed, std::move(b), seconds_since(t0)});
  }

  auto smoke_cfg = base;
  smoke_cfg.training.epochs = smoke_epochs;
  smoke_cfg.training.approach_ii_start_epoch = smoke_epochs / 2 + 1;
  const auto smoke = run(smoke_cfg, out / "smoke", cli::Stage::identify, reuse);

  // 5
  {
    bool pass = true;
    const auto detail = joined(runs, [&](const SeedRun& r) {
      std::string d;
      pass = accurate(r.bundle.approach_i->values, r.bundle.tip_peak, 0.05, d) && pass;
      pass = pass && r.seconds < 1800.0;
      return fmt::format("{}, {:.0f} s", d, r.seconds);
    });
    const double q = runs.empty() ? 0.0 : runs.front().bundle.tip_peak;
    const auto& k = smoke.approach_i->values;
    const bool smoke_pass = std::abs(k[0] - kK1) <= 0.1 * kK1 && std::abs(k[2] - kK3) <= 0.1 * kK3;
    report(5, "identification accuracy", pass && smoke_pass,
           fmt::format("{} epochs, q* = {:.4g} m: {}; {}-epoch smoke: k1 {}, k3 {} (<= 10%)", epochs, q, detail,
                       smoke_epochs, signed_pct(k[0], kK1), signed_pct(k[2], kK3)));
  }
  // 6
  {
    bool pass = true;
    const auto detail = joined(runs, [&](const SeedRun& r) {
      const double ld = trailing_mean(r.bundle.training_log, &ident::EpochRecord::loss_d, 100);
      const double la = trailing_mean(r.bundle.training_log, &ident::EpochRecord::loss_adv, 100);
      pass = pass && ld >= 1.24 && ld <= 1.53 && la >= 0.55 && la <= 0.85;
      return fmt::format("L_D {:.3f}, L_adv {:.3f}", ld, la);
    });
    report(6, "convergence signature", pass, detail + " (L_D in [1.24, 1.53], L_adv in [0.55, 0.85])");
  }
  // 7
  {
    bool pass = true;
    const auto detail = joined(runs, [&](const SeedRun& r) {
      const double mse = r.bundle.approach_i->mse.value_or(INFINITY);
      pass = pass && mse <= 1e-2;
      return fmt::format("{:.3e} m^2", mse);
    });
    report(7, "resimulation MSE", pass, detail + " (<= 1e-2)");
  }
  // 8
  {
    bool pass = true;
    const auto detail = joined(runs, [&](const SeedRun& r) {
      std::string d;
      for (const auto& [label, err] : r.bundle.tip_relative_l2) {
        if (!label.starts_with("validation")) continue;
        pass = pass && err <= 0.05;
        d += fmt::format("{}{} {:.2f}%", d.empty() ? "" : ", ", label, 100 * err);
      }
      return d;
    });
    report(8, "validation generalization", pass, detail + " (<= 5%)");
  }
  // 9
  {
    bool pass = true;
    const auto detail = joined(runs, [&](const SeedRun& r) {
      const double s = r.bundle.sindy->mse.value_or(INFINITY), a = r.bundle.approach_i->mse.value_or(INFINITY);
      pass = pass && s >= 10.0 * a;
      return fmt::format("SINDy {:.3e} / SIVA {:.3e} = {:.3g}x", s, a, s / a);
    });
    report(9, "baseline ordering", pass, detail + " (>= 10x)");
  }
  // 10
  {
    int k1_hits = 0, k3_hits = 0;
    bool shape = true;
    for (const auto& r : runs) {
      k1_hits += r.bundle.uq[0].ci_contains(kK1);
      k3_hits += r.bundle.uq[2].ci_contains(kK3);
      for (const auto& f : r.bundle.uq) {
        shape = shape && f.stddev > 0 && f.pdf_x.size() > 1 &&
                std::abs(f.pdf_x.front() - (f.mean - 6 * f.stddev)) <= 1e-9 * std::abs(f.mean) + 1e-12 &&
                std::abs(f.pdf_x.back() - (f.mean + 6 * f.stddev)) <= 1e-9 * std::abs(f.mean) + 1e-12;
      }
    }
    const auto detail = joined(runs, [](const SeedRun& r) {
      return fmt::format("k1 [{:.5g}, {:.5g}], k3 [{:.5g}, {:.5g}]", r.bundle.uq[0].ci95.first,
                         r.bundle.uq[0].ci95.second, r.bundle.uq[2].ci95.first, r.bundle.uq[2].ci95.second);
    });
    report(10, "UQ coverage", k1_hits >= 2 && k3_hits >= 2 && shape,
           fmt::format("k1 covered {}/{}, k3 covered {}/{}, sigma > 0 and +-6 sigma grids: {}; {}", k1_hits,
                       runs.size(), k3_hits, runs.size(), shape ? "yes" : "no", detail));
  }
  // 11
  {
    auto cfg = base;
    cfg.training.epochs = determinism_epochs;
    cfg.training.approach_ii_start_epoch = determinism_epochs / 2 + 1;
    run(cfg, out / "determinism_a", cli::Stage::identify, false);
    run(cfg, out / "determinism_b", cli::Stage::identify, false);
    bool same = true;
    for (const char* f : {cli::artifacts::kTrainingLog, cli::artifacts::kEstimates})
      same = same && cli::file_sha256(out / "determinism_a" / f) == cli::file_sha256(out / "determinism_b" / f);
    report(11, "determinism", same,
           fmt::format("two {}-epoch runs, seed {}: training log and estimates {}", determinism_epochs, cfg.seed,
                       same ? "byte-identical" : "differ"));
  }

  const auto failed = std::ranges::count_if(outcomes, [](const Outcome& o) { return !o.pass; });
  fmt::print("{} of {} criteria passed\n", outcomes.size() - static_cast<std::size_t>(failed), outcomes.size());
  return failed == 0 ? 0 : 1;
}
