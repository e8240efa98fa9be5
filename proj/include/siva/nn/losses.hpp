#pragma once

#include <span>

namespace siva::nn {

inline constexpr double kBceClamp = 1e-7;

double loss_mse(std::span<const double> a, std::span<const double> b);

/// Mean binary cross-entropy on probabilities clamped to [1e-7, 1 - 1e-7].
double loss_bce(std::span<const double> p, std::span<const double> labels);

/// Same loss taken on logits in the overflow-free form
/// max(x, 0) - x y + log(1 + exp(-|x|)). When `grad` is non-empty it receives
/// d(mean loss)/d(logit) = (sigmoid(x) - y) / n.
double bce_with_logits(std::span<const double> logits, std::span<const double> labels,
                       std::span<double> grad = {});

}  // namespace siva::nn
