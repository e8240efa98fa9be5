#include "siva/identify/estimates.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "siva/spectral/metrics.hpp"

namespace siva::ident {

std::string to_string(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::approach_i: return "approach_i";
    case EstimateMethod::approach_ii: return "approach_ii";
    case EstimateMethod::best_by_simulation: return "best_by_simulation";
    case EstimateMethod::sindy: return "sindy";
    case EstimateMethod::reference: return "reference";
  }
  return "?";
}

ParameterEstimate ParameterEstimate::point(const ParameterVector& values, EstimateMethod method) {
  ParameterEstimate e;
  e.values = values;
  e.mean = values;
  e.method = method;
  return e;
}

ParameterEstimate summarize(std::span<const ParameterVector> samples, EstimateMethod method) {
  if (samples.empty()) throw std::invalid_argument("summarize: no samples");
  ParameterEstimate e;
  e.method = method;
  e.sample_count = samples.size();
  const double n = static_cast<double>(samples.size());
  for (const auto& s : samples)
    for (std::size_t i = 0; i < kParameterCount; ++i) e.mean[i] += s[i];
  for (double& m : e.mean.k) m /= n;
  if (samples.size() > 1) {
    for (const auto& s : samples)
      for (std::size_t i = 0; i < kParameterCount; ++i) {
        const double d = s[i] - e.mean[i];
        e.stddev[i] += d * d;
      }
    for (double& v : e.stddev.k) v = std::sqrt(v / (n - 1.0));
  }
  e.values = e.mean;
  return e;
}

ParameterEstimate approach_I(const nn::Mlp& generator, std::size_t noise_dim, std::size_t n,
                             nn::RngStream& rng) {
  if (n == 0) throw std::invalid_argument("approach_I: n must be at least 1");
  num::DenseMatrix z(n, noise_dim);
  rng.fill_normal(z.data());
  const auto gen = generate_parameters(generator, z, "approach I");
  std::vector<ParameterVector> samples(n);
  for (std::size_t i = 0; i < n; ++i) samples[i] = gen.row(i);
  return summarize(samples, EstimateMethod::approach_i);
}

ParameterEstimate approach_I(const TrainingState& state, std::size_t n) {
  // XOR keeps this stream distinct from the one that drove training.
  nn::RngStream rng(state.config.seed ^ 0x5eedf00dULL);
  return approach_I(state.generator, state.config.noise_dim, n, rng);
}

ParameterEstimate approach_II(const TrainingState& state, std::size_t start_epoch) {
  const auto& h = state.history;
  if (start_epoch == 0) throw std::invalid_argument("approach_II: start_epoch is 1-based");
  if (start_epoch > h.size())
    throw std::invalid_argument(fmt::format(
        "approach_II: start epoch {} beyond the {} recorded epochs", start_epoch, h.size()));
  std::vector<ParameterVector> window;
  for (std::size_t e = start_epoch; e <= h.size(); ++e) window.push_back(h[e - 1].lambda);
  return summarize(window, EstimateMethod::approach_ii);
}

sim::TrajectorySet resimulate(const reduction::ReducedModel& reduced, const ParameterVector& values,
                              const sim::TrajectorySet& reference, const num::OdeOptions& options) {
  const auto& t = reference.times;
  if (t.size() < 2 || t.front() != 0.0)
    throw std::invalid_argument("resimulate: reference record must start at t = 0");
  sim::GridSpec grid;
  grid.duration = t.back();
  grid.sample_rate = static_cast<double>(t.size() - 1) / t.back();
  sim::AttachmentSpec attachment;
  attachment.coefficients = values.k;
  auto out = sim::simulate_reduced(reduced, attachment, reference.forcing.amplitude,
                                   reference.forcing.duration, grid, options);
  out.role = sim::DatasetRole::resimulation;
  if (out.sample_count() != reference.sample_count())
    throw sim::SimulationError("resimulate: grid does not reproduce the reference sampling");
  return out;
}

ParameterEstimate select_best(std::vector<ParameterEstimate>& candidates,
                              const reduction::ReducedModel& reduced,
                              const sim::TrajectorySet& reference, const num::OdeOptions& options) {
  if (candidates.empty()) throw std::invalid_argument("select_best: no candidates");
  const auto exact = reference.tip_displacement();
  std::size_t best = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto& cand = candidates[c];
    cand.failure.clear();
    try {
      if (!cand.values.all_finite()) throw sim::SimulationError("non-finite coefficients");
      const auto run = resimulate(reduced, cand.values, reference, options);
      const double mse = spectral::tip_mse(exact, run.tip_displacement());
      if (!std::isfinite(mse)) throw sim::SimulationError("non-finite response");
      cand.mse = mse;
    } catch (const std::exception& e) {
      cand.mse = std::numeric_limits<double>::infinity();
      cand.failure = e.what();
    }
    if (*cand.mse < *candidates[best].mse) best = c;
  }
  return candidates[best];
}

}  // namespace siva::ident
