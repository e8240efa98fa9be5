#pragma once

#include <cstdint>
#include <span>

#include "siva/numerics/dense_matrix.hpp"

namespace siva::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  AdamConfig config;
  num::Vector m;
  num::Vector v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t parameter_count, AdamConfig cfg = {})
      : config(cfg), m(parameter_count, 0.0), v(parameter_count, 0.0) {}
};

/// One bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace siva::nn
