#include "siva/nn/losses.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "siva/nn/mlp.hpp"

namespace siva::nn {

namespace {

void check_sizes(const char* what, std::size_t a, std::size_t b) {
  if (a != b) throw num::DimensionError(fmt::format("{}: sizes {} and {} differ", what, a, b));
  if (a == 0) throw num::DimensionError(fmt::format("{}: empty input", what));
}

}  // namespace

double loss_mse(std::span<const double> a, std::span<const double> b) {
  check_sizes("loss_mse", a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double loss_bce(std::span<const double> p, std::span<const double> labels) {
  check_sizes("loss_bce", p.size(), labels.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    s -= labels[i] * std::log(q) + (1.0 - labels[i]) * std::log1p(-q);
  }
  return s / static_cast<double>(p.size());
}

double bce_with_logits(std::span<const double> logits, std::span<const double> labels,
                       std::span<double> grad) {
  check_sizes("bce_with_logits", logits.size(), labels.size());
  if (!grad.empty() && grad.size() != logits.size())
    throw num::DimensionError("bce_with_logits: gradient buffer size mismatch");
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i], y = labels[i];
    s += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    if (!grad.empty()) grad[i] = (apply(Activation::sigmoid, x) - y) * inv_n;
  }
  return s * inv_n;
}

}  // namespace siva::nn
