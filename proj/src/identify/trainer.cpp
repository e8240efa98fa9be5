#include "siva/identify/trainer.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "siva/nn/losses.hpp"

namespace siva::ident {

void TrainingConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("training.epochs must be at least 1");
  if (batch_size == 0) throw std::invalid_argument("training.batch_size must be at least 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("training.gamma must be finite and >= 0");
  if (!(generator_learning_rate > 0.0))
    throw std::invalid_argument("training.generator_learning_rate must be positive");
  if (!(discriminator_learning_rate > 0.0))
    throw std::invalid_argument("training.discriminator_learning_rate must be positive");
  if (noise_dim == 0) throw std::invalid_argument("training.noise_dim must be at least 1");
  if (collapse_epochs == 0) throw std::invalid_argument("training.collapse_epochs must be at least 1");
  if (approach_ii_start_epoch == 0)
    throw std::invalid_argument("training.approach_ii_start_epoch is 1-based");
}

Standardization Standardization::fit(const DenseMatrix& samples) {
  if (samples.rows() < 2) throw std::invalid_argument("standardization needs at least two samples");
  Standardization s;
  const std::size_t n = samples.cols();
  const double rows = static_cast<double>(samples.rows());
  s.mean.assign(n, 0.0);
  s.scale.assign(n, 0.0);
  for (std::size_t r = 0; r < samples.rows(); ++r)
    for (std::size_t j = 0; j < n; ++j) s.mean[j] += samples(r, j);
  for (double& m : s.mean) m /= rows;
  for (std::size_t r = 0; r < samples.rows(); ++r)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = samples(r, j) - s.mean[j];
      s.scale[j] += d * d;
    }
  for (std::size_t j = 0; j < n; ++j) {
    s.scale[j] = std::sqrt(s.scale[j] / rows);
    if (!(s.scale[j] > 0.0))
      throw std::invalid_argument(fmt::format("standardization: channel {} is constant", j));
  }
  return s;
}

DenseMatrix Standardization::apply(const DenseMatrix& x) const {
  if (x.cols() != mean.size()) throw num::DimensionError("standardization: width mismatch");
  DenseMatrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) = (x(r, j) - mean[j]) / scale[j];
  return out;
}

namespace {

std::vector<std::size_t> with_ends(std::size_t first, const std::vector<std::size_t>& hidden,
                                   std::size_t last) {
  std::vector<std::size_t> s{first};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(last);
  return s;
}

PhysicsData pooled_validation(const PhysicsLayer& layer,
                              std::span<const sim::TrajectorySet> validation) {
  if (validation.empty()) throw std::invalid_argument("train: at least one validation record is required");
  std::vector<PhysicsData> parts;
  for (const auto& v : validation) parts.push_back(prepare_physics_data(layer, v));
  return pool(parts);
}

}  // namespace

Trainer::Trainer(TrainingConfig config, const reduction::ReducedModel& reduced,
                 const sim::TrajectorySet& training,
                 std::span<const sim::TrajectorySet> validation)
    : layer_(reduced),
      training_(prepare_physics_data(layer_, training)),
      validation_(pooled_validation(layer_, validation)),
      collapse_(config.collapse_loss, config.collapse_epochs) {
  config.validate();
  if (config.batch_size > training_.sample_count())
    throw std::invalid_argument(fmt::format("training.batch_size {} exceeds the {} training samples",
                                            config.batch_size, training_.sample_count()));
  state_.config = config;
  state_.rng = nn::RngStream(config.seed);
  state_.generator = nn::init_mlp(with_ends(config.noise_dim, config.generator_hidden, 2 * kParameterCount),
                                  nn::Activation::linear, state_.rng);
  state_.discriminator = nn::init_mlp(with_ends(layer_.dim(), config.discriminator_hidden, 1),
                                      nn::Activation::sigmoid, state_.rng);
  state_.generator_adam = nn::AdamState(state_.generator.parameter_count(),
                                        nn::AdamConfig{config.generator_learning_rate});
  state_.discriminator_adam = nn::AdamState(state_.discriminator.parameter_count(),
                                            nn::AdamConfig{config.discriminator_learning_rate});
  state_.discriminator_input = Standardization::fit(validation_.measured);
}

DenseMatrix Trainer::draw_noise(std::size_t rows) {
  DenseMatrix z(rows, state_.config.noise_dim);
  state_.rng.fill_normal(z.data());
  return z;
}

std::vector<std::size_t> Trainer::draw_validation_indices(std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = state_.rng.below(validation_.sample_count());
  return idx;
}

double Trainer::discriminator_step() {
  const auto& cfg = state_.config;
  const std::size_t b = cfg.batch_size, n = layer_.dim();
  const auto gen = generate_parameters(state_.generator, draw_noise(b), "discriminator step", cfg.backend);
  const auto idx = draw_validation_indices(b);
  const auto fake = paired_fake_accelerations(validation_, layer_.tip_influence(), idx, gen.k);

  DenseMatrix x(2 * b, n);
  for (std::size_t i = 0; i < b; ++i) {
    std::ranges::copy(validation_.measured.row(idx[i]), x.row(i).begin());
    std::ranges::copy(fake.row(i), x.row(b + i).begin());
  }
  x = state_.discriminator_input.apply(x);
  Vector labels(2 * b, 0.0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(b), 1.0);

  const auto fr = nn::forward(state_.discriminator, x, cfg.backend);
  DenseMatrix grad(2 * b, 1);
  // Mean over both classes equals half of (real mean + fake mean).
  const double loss = 2.0 * nn::bce_with_logits(fr.cache.logits().data(), labels, grad.data());
  grad *= 2.0;
  const auto g = nn::backward(state_.discriminator, fr.cache, grad, nn::GradientAt::logit, cfg.backend);
  nn::adam_step(state_.discriminator.parameters(), g.parameters, state_.discriminator_adam);
  return loss;
}

Trainer::GeneratorStep Trainer::generator_step(std::span<const std::size_t> training_indices) {
  const auto& cfg = state_.config;
  const std::size_t b = cfg.batch_size, n = layer_.dim();
  const auto& gvec = layer_.tip_influence();
  const auto gen = generate_parameters(state_.generator, draw_noise(b), "generator step", cfg.backend);
  const auto idx = draw_validation_indices(b);

  // adversarial term through the frozen discriminator
  const auto fake = paired_fake_accelerations(validation_, gvec, idx, gen.k);
  const auto fr = nn::forward(state_.discriminator, state_.discriminator_input.apply(fake), cfg.backend);
  const Vector ones(b, 1.0);
  DenseMatrix glogit(b, 1);
  GeneratorStep out;
  out.loss_adv = nn::bce_with_logits(fr.cache.logits().data(), ones, glogit.data());
  auto gin = nn::backward(state_.discriminator, fr.cache, glogit, nn::GradientAt::logit, cfg.backend).input;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < n; ++j) gin(i, j) /= state_.discriminator_input.scale[j];
  DenseMatrix grad_k = paired_fake_backward(validation_, gvec, idx, gin);

  const auto mse = physics_mse(cfg.backend, training_, gvec, training_indices, gen.k, true);
  out.loss_mse = mse.loss;
  if (cfg.gamma != 0.0) grad_k += cfg.gamma * mse.grad_k;

  const auto graw = compose_backward(gen, grad_k);
  const auto gg = nn::backward(state_.generator, gen.cache, graw, nn::GradientAt::output, cfg.backend);
  nn::adam_step(state_.generator.parameters(), gg.parameters, state_.generator_adam);
  out.batch_mean = gen.mean();
  return out;
}

const EpochRecord& Trainer::run_epoch() {
  const auto last_good = std::make_shared<const TrainingState>(state_);
  const std::size_t epoch = state_.history.size() + 1;
  const std::size_t b = state_.config.batch_size, total = training_.sample_count();

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = total - 1; i > 0; --i) std::swap(order[i], order[state_.rng.below(i + 1)]);

  const std::size_t steps = total / b;  // the ragged tail is dropped
  EpochRecord rec;
  rec.epoch = epoch;
  try {
    for (std::size_t s = 0; s < steps; ++s) {
      rec.loss_d += discriminator_step();
      const auto g = generator_step(std::span(order).subspan(s * b, b));
      rec.loss_adv += g.loss_adv;
      rec.loss_mse += g.loss_mse;
      rec.lambda = g.batch_mean;
    }
  } catch (const NonFiniteParameterError& e) {
    state_ = *last_good;
    throw TrainingError(fmt::format("epoch {}: {}", epoch, e.what()), epoch, last_good);
  }
  const double inv = 1.0 / static_cast<double>(steps);
  rec.loss_d *= inv;
  rec.loss_adv *= inv;
  rec.loss_mse *= inv;
  rec.loss_p = rec.loss_adv + state_.config.gamma * rec.loss_mse;
  if (!std::isfinite(rec.loss_d) || !std::isfinite(rec.loss_p) || !rec.lambda.all_finite()) {
    state_ = *last_good;
    throw TrainingError(fmt::format("epoch {}: non-finite loss (L_D = {}, L_adv = {}, L_MSE = {})",
                                    epoch, rec.loss_d, rec.loss_adv, rec.loss_mse),
                        epoch, last_good);
  }

  if (collapse_.update(rec.loss_d) && observer_ && observer_->on_warning)
    observer_->on_warning(fmt::format(
        "discriminator collapse: L_D below {} for {} consecutive epochs (epoch {})",
        state_.config.collapse_loss, state_.config.collapse_epochs, epoch));
  state_.history.push_back(rec);
  return state_.history.back();
}

const TrainingState& Trainer::run(const TrainingObserver& observer) {
  observer_ = &observer;
  while (state_.history.size() < state_.config.epochs) {
    const auto& rec = run_epoch();
    if (observer.on_epoch) observer.on_epoch(rec);
  }
  observer_ = nullptr;
  return state_;
}

double Trainer::generator_mse_gradient(const nn::Mlp& generator, const DenseMatrix& z,
                                       std::span<const std::size_t> training_indices,
                                       Vector* grad) const {
  const auto& cfg = state_.config;
  const auto gen = generate_parameters(generator, z, {}, cfg.backend);
  const auto mse = physics_mse(cfg.backend, training_, layer_.tip_influence(), training_indices,
                               gen.k, grad != nullptr);
  if (grad) {
    const auto graw = compose_backward(gen, mse.grad_k);
    *grad = nn::backward(generator, gen.cache, graw, nn::GradientAt::output, cfg.backend).parameters;
  }
  return mse.loss;
}

TrainingState train(const TrainingConfig& config, const reduction::ReducedModel& reduced,
                    const sim::TrajectorySet& training,
                    std::span<const sim::TrajectorySet> validation,
                    const TrainingObserver& observer) {
  Trainer t(config, reduced, training, validation);
  return t.run(observer);
}

}  // namespace siva::ident
