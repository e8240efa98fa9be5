#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "siva/beam/beam_model.hpp"
#include "siva/identify/estimates.hpp"
#include "siva/identify/physics.hpp"
#include "siva/identify/trainer.hpp"
#include "siva/reduction/guyan.hpp"

using namespace siva;
using namespace siva::ident;
using num::DenseMatrix;

namespace {

const ParameterVector kTruth{{1.1e4, 0.0, 1e8, 0.0, 0.0}};

struct Bench {
  beam::FullModel model = beam::build_full_model(beam::BeamSpec{});
  DenseMatrix damping;
  reduction::ReducedModel reduced;

  Bench() {
    const auto modal = beam::modal_analysis(model);
    damping = beam::build_damping(model, modal.frequencies_hz, beam::reference_damping_ratios(),
                                  modal.shapes);
    reduced = reduction::guyan_reduce(model, damping, reduction::select_translational(model));
  }

  sim::DatasetBundle datasets(double duration) const {
    sim::GridSpec g;
    g.duration = duration;
    return sim::make_datasets(model, damping, sim::AttachmentSpec::linear_cubic(1.1e4, 1e8),
                              sim::DatasetPlan{}, g);
  }
};

const Bench& bench() {
  static const Bench b;
  return b;
}

const sim::DatasetBundle& full_data() {
  static const auto d = bench().datasets(4.0);
  return d;
}

const sim::DatasetBundle& short_data() {
  static const auto d = bench().datasets(0.5);
  return d;
}

reduction::ReducedModel toy_model() {
  reduction::ReducedModel m;
  m.mass = DenseMatrix{{1.0}};
  m.damping = DenseMatrix{{0.0}};
  m.stiffness = DenseMatrix{{0.0}};
  m.tip_index = 0;
  return m;
}

// Generator whose hidden weights are random but whose output biases sit at
// the given (a, b) pairs, so the composed k are near chosen magnitudes.
nn::Mlp generator_near(const ParameterVector& a, const ParameterVector& b, double weight_scale,
                       std::uint64_t seed) {
  nn::RngStream rng(seed);
  auto g = nn::init_mlp({16, 64, 32, 16, 10}, nn::Activation::linear, rng);
  for (double& w : g.weights(3)) w *= weight_scale;
  auto bias = g.biases(3);
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    bias[2 * i] = a[i];
    bias[2 * i + 1] = b[i];
  }
  return g;
}

double rel(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

TrainingConfig short_config() {
  TrainingConfig c;
  c.epochs = 3;
  c.batch_size = 100;
  return c;
}

}  // namespace

TEST_CASE("generate_parameters: mantissa-exponent composition") {
  nn::Mlp g({16, 64, 32, 16, 10}, nn::Activation::linear);
  auto bias = g.biases(3);
  bias[0] = 1.1;
  bias[1] = 4.0;
  bias[2] = 0.0;
  bias[3] = 37.0;
  bias[4] = -2.5;
  bias[5] = 1.5;
  DenseMatrix z(3, 16);
  nn::RngStream rng(1);
  rng.fill_normal(z.data());
  const auto out = generate_parameters(g, z);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(out.k(r, 0) == doctest::Approx(1.1e4).epsilon(1e-15));
    CHECK(out.k(r, 1) == 0.0);
    CHECK(out.k(r, 2) == doctest::Approx(-2.5 * std::pow(10.0, 1.5)));
  }
  CHECK(out.mean()[0] == doctest::Approx(1.1e4));

  bias[9] = 400.0;
  bias[8] = 1.0;
  CHECK_THROWS_AS(generate_parameters(g, z, "epoch 7"), NonFiniteParameterError);
  nn::Mlp wrong({16, 8}, nn::Activation::linear);
  CHECK_THROWS_AS(generate_parameters(wrong, z), num::DimensionError);
}

TEST_CASE("compose_backward: analytic derivatives of a * 10^b") {
  nn::Mlp g({2, 10}, nn::Activation::linear);
  nn::RngStream rng(2);
  for (double& p : g.parameters()) p = rng.uniform(-1.5, 1.5);
  DenseMatrix z(4, 2);
  rng.fill_normal(z.data());
  const auto out = generate_parameters(g, z);
  DenseMatrix gk(4, kParameterCount, 1.0);
  const auto graw = compose_backward(out, gk);
  const double h = 1e-7;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      const double a = out.raw(r, 2 * i), b = out.raw(r, 2 * i + 1);
      const double da = (compose(a + h, b) - compose(a - h, b)) / (2 * h);
      const double db = (compose(a, b + h) - compose(a, b - h)) / (2 * h);
      CHECK(graw(r, 2 * i) == doctest::Approx(da).epsilon(1e-7));
      CHECK(graw(r, 2 * i + 1) == doctest::Approx(db).epsilon(1e-7));
      CHECK(graw(r, 2 * i + 1) == doctest::Approx(out.k(r, i) * std::numbers::ln10));
    }
}

TEST_CASE("physics_accel: rest, toy system, linear limit") {
  const auto toy = toy_model();
  const std::vector<double> q{2.0}, qd{0.0}, f{0.0};
  CHECK(physics_accel(toy, ParameterVector{{2.0, 0.0, 1.0, 0.0, 0.0}}, q, qd, f)[0] == -12.0);

  const auto& red = bench().reduced;
  const std::vector<double> zero(15, 0.0);
  const auto rest = physics_accel(red, kTruth, zero, zero, zero);
  CHECK(std::ranges::all_of(rest, [](double v) { return v == 0.0; }));

  // just after the pulse starts the state is still at rest, so qdd = M^{-1} F
  std::vector<double> force(15, 0.0);
  force[red.tip_index] = 2000.0 * std::sin(std::numbers::pi * 1e-6 / 0.00635);
  const auto a0 = physics_accel(red, ParameterVector{}, zero, zero, force);
  const auto expect = num::solve_linear(red.mass, DenseMatrix::column(force));
  for (std::size_t j = 0; j < 15; ++j) CHECK(a0[j] == doctest::Approx(expect(j, 0)).epsilon(1e-12));

  CHECK_THROWS_AS(physics_accel(red, kTruth, q, qd, f), num::DimensionError);
}

TEST_CASE("physics_accel: reproduces a linear reduced simulation") {
  const auto& red = bench().reduced;
  sim::GridSpec g;
  g.duration = 0.2;
  const auto run = sim::simulate_reduced(red, sim::AttachmentSpec{}, 2000.0, 0.00635, g);
  sim::ForcingSpec f;
  f.amplitude = 2000.0;
  double worst = 0.0, scale = run.qdd.max_abs();
  std::vector<double> force(15, 0.0);
  for (std::size_t r = 0; r < run.sample_count(); ++r) {
    force[red.tip_index] = sim::half_sine(f, run.times[r]);
    const auto a = physics_accel(red, ParameterVector{}, run.q.row(r), run.qd.row(r), force);
    for (std::size_t j = 0; j < 15; ++j) worst = std::max(worst, std::abs(a[j] - run.qdd(r, j)));
  }
  CHECK(worst <= 1e-9 * scale);
}

TEST_CASE("physics_accel: affine in lambda") {
  const auto& red = bench().reduced;
  const PhysicsLayer layer(red);
  nn::RngStream rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q(15), qd(15), f(15, 0.0);
    for (auto& v : q) v = rng.uniform(-0.04, 0.04);
    for (auto& v : qd) v = rng.uniform(-2.0, 2.0);
    f[red.tip_index] = rng.uniform(0.0, 3000.0);
    ParameterVector la, lb, sum;
    // dyadic values keep every product exact
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      la[i] = std::ldexp(std::round(rng.uniform(-64, 64)), 8 * int(i));
      lb[i] = std::ldexp(std::round(rng.uniform(-64, 64)), 8 * int(i));
      sum[i] = la[i] + lb[i];
    }
    q[red.tip_index] = 0.03125;
    std::vector<double> ab(15), a(15), b(15), z(15);
    layer.acceleration(sum, q, qd, f, ab);
    layer.acceleration(la, q, qd, f, a);
    layer.acceleration(lb, q, qd, f, b);
    layer.acceleration(ParameterVector{}, q, qd, f, z);
    // the attachment force itself is exact in this arithmetic
    CHECK(sum.restoring_force(q[red.tip_index]) ==
          la.restoring_force(q[red.tip_index]) + lb.restoring_force(q[red.tip_index]));
    for (std::size_t j = 0; j < 15; ++j) {
      const double mag = std::abs(ab[j]) + std::abs(a[j]) + std::abs(b[j]) + std::abs(z[j]);
      CHECK(std::abs(ab[j] - a[j] - b[j] + z[j]) <= 1e-14 * mag);
    }
  }
}

TEST_CASE("accel_grad_wrt_k: finite differences, monomial scaling, zero tip") {
  const auto& red = bench().reduced;
  const PhysicsLayer layer(red);
  std::vector<double> q(15, 0.01), qd(15, 0.1), f(15, 0.0);
  q[red.tip_index] = 0.027;
  const auto d = layer.acceleration_gradient(q);
  ParameterVector base = kTruth;
  double worst = 0.0;
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    // a step that moves the attachment force by about 1 N
    const double h = 1.0 / std::pow(q[red.tip_index], double(i + 1));
    auto up = base, dn = base;
    up[i] += h;
    dn[i] -= h;
    std::vector<double> au(15), ad(15);
    layer.acceleration(up, q, qd, f, au);
    layer.acceleration(dn, q, qd, f, ad);
    for (std::size_t j = 0; j < 15; ++j)
      worst = std::max(worst, rel((au[j] - ad[j]) / (2 * h), d(j, i), 1e-300));
  }
  CHECK(worst <= 1e-7);

  auto q2 = q;
  q2[red.tip_index] *= 2.0;
  const auto d2 = accel_grad_wrt_k(red, q2);
  for (std::size_t j = 0; j < 15; ++j) CHECK(d2(j, 2) == doctest::Approx(8.0 * d(j, 2)).epsilon(1e-14));

  q[red.tip_index] = 0.0;
  const auto d0 = layer.acceleration_gradient(q);
  CHECK(d0.max_abs() == 0.0);
}

TEST_CASE("physics_mse: factored kernel matches the direct reference") {
  const auto& red = bench().reduced;
  const PhysicsLayer layer(red);
  const auto data = prepare_physics_data(layer, short_data().training);
  nn::RngStream rng(8);
  std::vector<std::size_t> idx(60);
  for (auto& i : idx) i = rng.below(data.sample_count());
  DenseMatrix k(7, kParameterCount);
  for (std::size_t s = 0; s < 7; ++s)
    for (std::size_t i = 0; i < kParameterCount; ++i)
      k(s, i) = kTruth[i] * (1.0 + 0.1 * rng.normal()) + std::pow(10.0, 2 * double(i)) * rng.normal();
  const auto a = serial::physics_mse(data, layer.tip_influence(), idx, k);
  const auto b = parallel::physics_mse(data, layer.tip_influence(), idx, k);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-10));
  for (std::size_t s = 0; s < 7; ++s)
    for (std::size_t i = 0; i < kParameterCount; ++i)
      CHECK(rel(a.grad_k(s, i), b.grad_k(s, i), 1e-6 * std::abs(a.grad_k(s, 0))) <= 1e-8);

  // gradient against central differences of the direct kernel
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    const double h = 1e-4 * std::max(1.0, std::abs(k(3, i)));
    auto up = k, dn = k;
    up(3, i) += h;
    dn(3, i) -= h;
    const double fd = (serial::physics_mse(data, layer.tip_influence(), idx, up, false).loss -
                       serial::physics_mse(data, layer.tip_influence(), idx, dn, false).loss) /
                      (2 * h);
    CHECK(rel(fd, a.grad_k(3, i), 1e-12) <= 1e-5);
  }
  CHECK_THROWS_AS(serial::physics_mse(data, layer.tip_influence(), std::vector<std::size_t>{99999}, k),
                  std::out_of_range);
}

TEST_CASE("physics layer: the Guyan floor is small next to the nonlinear signal") {
  const auto& red = bench().reduced;
  const PhysicsLayer layer(red);
  const auto data = prepare_physics_data(layer, full_data().training);
  std::vector<std::size_t> all(data.sample_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  DenseMatrix truth(1, kParameterCount), zero(1, kParameterCount);
  for (std::size_t i = 0; i < kParameterCount; ++i) truth(0, i) = kTruth[i];
  const double with_truth = physics_mse(nn::kernels::Backend::parallel, data, layer.tip_influence(), all, truth).loss;
  const double with_zero = physics_mse(nn::kernels::Backend::parallel, data, layer.tip_influence(), all, zero).loss;
  MESSAGE("L_MSE truth " << with_truth << ", zero " << with_zero);
  CHECK(with_truth * 100.0 <= with_zero);
}

TEST_CASE("generator -> physics -> L_MSE gradient matches central differences") {
  const auto& d = full_data();
  const std::vector<sim::TrajectorySet> val = d.validation;
  Trainer tr(short_config(), bench().reduced, d.training, val);
  const auto gen = generator_near(ParameterVector{{1.0, 0.5, 0.9, 0.3, -0.2}},
                                  ParameterVector{{4.0, 5.0, 8.0, 9.0, 10.0}}, 0.05, 77);
  nn::RngStream rng(78);
  DenseMatrix z(6, 16);
  rng.fill_normal(z.data());
  std::vector<std::size_t> idx(80);
  for (auto& i : idx) i = rng.below(tr.training_data().sample_count());

  num::Vector grad;
  tr.generator_mse_gradient(gen, z, idx, &grad);
  double worst = 0.0;
  for (int pick = 0; pick < 20; ++pick) {
    const std::size_t p = rng.below(gen.parameter_count());
    auto probe = gen;
    const double p0 = probe.parameters()[p];
    const double h = 1e-6 * std::max(1.0, std::abs(p0));
    probe.parameters()[p] = p0 + h;
    const double up = tr.generator_mse_gradient(probe, z, idx, nullptr);
    probe.parameters()[p] = p0 - h;
    const double dn = tr.generator_mse_gradient(probe, z, idx, nullptr);
    const double fd = (up - dn) / (2 * h);
    if (std::abs(fd) < 1e-6 && std::abs(grad[p]) < 1e-6) continue;  // LeakyReLU kink or dead path
    worst = std::max(worst, rel(fd, grad[p], 1e-6));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("train: L_P identity, record count, determinism") {
  const auto& d = short_data();
  const std::vector<sim::TrajectorySet> val = d.validation;
  const auto a = train(short_config(), bench().reduced, d.training, val);
  const auto b = train(short_config(), bench().reduced, d.training, val);
  REQUIRE(a.completed_epochs() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    const auto& r = a.history[e];
    CHECK(r.epoch == e + 1);
    CHECK(std::abs(r.loss_p - (r.loss_adv + a.config.gamma * r.loss_mse)) <= 1e-12 * std::abs(r.loss_p));
    CHECK(r.loss_d == b.history[e].loss_d);
    CHECK(r.loss_mse == b.history[e].loss_mse);
    CHECK(r.lambda == b.history[e].lambda);
  }
  CHECK(std::ranges::equal(a.generator.parameters(), b.generator.parameters()));
  CHECK(a.rng == b.rng);

  auto c3 = short_config();
  c3.seed = 43;
  const auto c = train(c3, bench().reduced, d.training, val);
  CHECK(c.history[0].loss_d != a.history[0].loss_d);
}

TEST_CASE("train: configuration and input validation") {
  const auto& d = short_data();
  const std::vector<sim::TrajectorySet> val = d.validation;
  auto cfg = short_config();
  cfg.gamma = -1.0;
  CHECK_THROWS(Trainer(cfg, bench().reduced, d.training, val));
  cfg = short_config();
  cfg.batch_size = 5000;
  CHECK_THROWS(Trainer(cfg, bench().reduced, d.training, val));
  CHECK_THROWS(Trainer(short_config(), bench().reduced, d.training, std::span<const sim::TrajectorySet>{}));
}

TEST_CASE("train: with the generator frozen the discriminator separates the classes") {
  const auto& d = short_data();
  const std::vector<sim::TrajectorySet> val = d.validation;
  auto cfg = short_config();
  cfg.gamma = 0.0;
  cfg.discriminator_learning_rate = 1e-3;
  Trainer tr(cfg, bench().reduced, d.training, val);
  const double first = tr.discriminator_step();
  double tail = 0.0;
  for (int s = 1; s < 800; ++s) {
    const double l = tr.discriminator_step();
    if (s >= 750) tail += l / 50.0;
  }
  MESSAGE("L_D " << first << " -> " << tail);
  CHECK(first == doctest::Approx(std::log(4.0)).epsilon(0.1));
  CHECK(tail < 0.5 * std::log(4.0));
}

TEST_CASE("train: non-finite parameters abort with the last good state") {
  const auto& d = short_data();
  const std::vector<sim::TrajectorySet> val = d.validation;
  Trainer tr(short_config(), bench().reduced, d.training, val);
  tr.run_epoch();
  auto bias = tr.state().generator.biases(3);
  bias[1] = 500.0;
  bias[0] = 1.0;
  const auto snapshot = tr.state().generator;
  try {
    tr.run_epoch();
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() == 2);
    CHECK(e.last_good().completed_epochs() == 1);
    CHECK(std::ranges::equal(e.last_good().generator.parameters(), snapshot.parameters()));
    CHECK(std::string(e.what()).find("epoch 2") != std::string::npos);
  }
  CHECK(tr.state().completed_epochs() == 1);
}

TEST_CASE("CollapseMonitor: fires once after a full run of low losses") {
  CollapseMonitor m(0.01, 50);
  int fired = 0;
  for (int e = 0; e < 49; ++e) fired += m.update(0.001);
  fired += m.update(0.5);  // streak broken
  CHECK(m.streak() == 0);
  for (int e = 0; e < 49; ++e) fired += m.update(0.009);
  CHECK(fired == 0);
  CHECK(m.update(0.009));
  for (int e = 0; e < 100; ++e) fired += m.update(0.0);
  CHECK(fired == 0);
}

TEST_CASE("train: sustained discriminator collapse raises one warning") {
  const auto& d = short_data();
  const std::vector<sim::TrajectorySet> val = d.validation;
  auto cfg = short_config();
  cfg.epochs = 120;
  cfg.collapse_loss = 0.05;
  cfg.collapse_epochs = 20;
  cfg.batch_size = 100;
  cfg.gamma = 0.0;
  cfg.generator_learning_rate = 1e-300;
  cfg.discriminator_learning_rate = 2e-3;
  Trainer tr(cfg, bench().reduced, d.training, val);
  // every sample at k1 = 1e10 puts generated accelerations far from anything recorded
  for (double& w : tr.state().generator.weights(3)) w = 0.0;
  auto bias = tr.state().generator.biases(3);
  bias[0] = 1.0;
  bias[1] = 10.0;
  int warnings = 0;
  TrainingObserver obs;
  obs.on_warning = [&](std::string_view msg) {
    ++warnings;
    CHECK(msg.find("collapse") != std::string_view::npos);
  };
  tr.run(obs);
  CHECK(warnings == 1);
}

TEST_CASE("approach_I: deterministic generator and single draws") {
  nn::Mlp g({16, 8, 10}, nn::Activation::linear);
  auto bias = g.biases(1);
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    bias[2 * i] = 1.0 + double(i);
    bias[2 * i + 1] = double(i);
  }
  nn::RngStream rng(9);
  const auto e = approach_I(g, 16, 1000, rng);
  CHECK(e.sample_count == 1000);
  CHECK(e.method == EstimateMethod::approach_i);
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    CHECK(e.values[i] == doctest::Approx(compose(1.0 + double(i), double(i))));
    CHECK(e.stddev[i] == 0.0);
  }
  const auto rnd = generator_near(ParameterVector{{1, 1, 1, 1, 1}}, ParameterVector{}, 1.0, 4);
  nn::RngStream r1(10), r2(10);
  const auto one = approach_I(rnd, 16, 1, r1);
  DenseMatrix z(1, 16);
  r2.fill_normal(z.data());
  const auto direct = generate_parameters(rnd, z);
  CHECK(one.values == direct.row(0));
  CHECK_THROWS(approach_I(rnd, 16, 0, r1));
}

TEST_CASE("approach_II: window statistics") {
  TrainingState s;
  for (std::size_t e = 1; e <= 10; ++e) {
    EpochRecord r;
    r.epoch = e;
    r.lambda = e <= 4 ? ParameterVector{{9, 9, 9, 9, 9}} : ParameterVector{{1.1e4, 0, 1e8, 0, 0}};
    s.history.push_back(r);
  }
  const auto e = approach_II(s, 5);
  CHECK(e.sample_count == 6);
  CHECK(e.values == ParameterVector{{1.1e4, 0, 1e8, 0, 0}});
  CHECK(e.stddev == ParameterVector{});
  const auto last = approach_II(s, 10);
  CHECK(last.sample_count == 1);
  CHECK(last.values == s.history.back().lambda);
  const auto all = approach_II(s, 1);
  CHECK(all.stddev[0] > 0.0);
  CHECK_THROWS(approach_II(s, 11));
  CHECK_THROWS(approach_II(s, 0));
}

TEST_CASE("select_best: the truth wins, failures are recorded") {
  const auto& red = bench().reduced;
  const auto& ref = full_data().training;
  std::vector<ParameterEstimate> cands{
      ParameterEstimate::point(ParameterVector{{1.2e4, 0, 0.9e8, 0, 0}}, EstimateMethod::approach_i),
      ParameterEstimate::point(kTruth, EstimateMethod::reference),
      ParameterEstimate::point(ParameterVector{{1.1e4, 0, 0, 0, 0}}, EstimateMethod::sindy),
      ParameterEstimate::point(ParameterVector{{1.1e4, 0, 1e8, 0, -1e20}}, EstimateMethod::approach_ii),
  };
  const auto best = select_best(cands, red, ref);
  CHECK(best.method == EstimateMethod::reference);
  for (const auto& c : cands) CHECK(c.mse.has_value());
  CHECK(*cands[1].mse < *cands[0].mse);
  CHECK(*cands[1].mse < *cands[2].mse);
  MESSAGE("truth resimulation MSE " << *cands[1].mse << ", failure: " << cands[3].failure);
  CHECK(*cands[1].mse < 1e-4);
  CHECK(std::isinf(*cands[3].mse));
  CHECK_FALSE(cands[3].failure.empty());

  std::vector<ParameterEstimate> single{ParameterEstimate::point(kTruth, EstimateMethod::approach_i)};
  const auto only = select_best(single, red, ref);
  CHECK(only.values == kTruth);
  CHECK(only.method == EstimateMethod::approach_i);
  CHECK(only.mse == single[0].mse);
  std::vector<ParameterEstimate> none;
  CHECK_THROWS(select_best(none, red, ref));
}
