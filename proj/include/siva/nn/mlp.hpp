#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "siva/nn/kernels.hpp"
#include "siva/nn/rng.hpp"
#include "siva/numerics/dense_matrix.hpp"

namespace siva::nn {

using num::DenseMatrix;
using num::Vector;

enum class Activation { linear, sigmoid, leaky_relu };

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view name);

inline constexpr double kLeakySlope = 0.2;

double apply(Activation a, double x) noexcept;
/// Derivative expressed through the pre-activation x.
double derivative(Activation a, double x) noexcept;

/// Fully connected network. Hidden layers use LeakyReLU; the output layer is
/// linear or sigmoid. Parameters live in one flat vector laid out as
/// [W1 (out x in, row-major), b1, W2, b2, ...].
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> layer_sizes, Activation output);

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t layer_count() const noexcept { return sizes_.empty() ? 0 : sizes_.size() - 1; }
  std::size_t input_size() const noexcept { return sizes_.front(); }
  std::size_t output_size() const noexcept { return sizes_.back(); }
  Activation output_activation() const noexcept { return output_; }
  Activation activation(std::size_t layer) const noexcept {
    return layer + 1 == layer_count() ? output_ : Activation::leaky_relu;
  }

  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<const double> parameters() const noexcept { return params_; }
  /// Mutable access invalidates outstanding forward caches.
  std::span<double> parameters() noexcept {
    ++version_;
    return params_;
  }
  std::uint64_t version() const noexcept { return version_; }

  std::span<const double> weights(std::size_t layer) const noexcept;
  std::span<const double> biases(std::size_t layer) const noexcept;
  std::span<double> weights(std::size_t layer) noexcept;
  std::span<double> biases(std::size_t layer) noexcept;

  /// Offset of layer `layer`'s weight block inside the flat vector.
  std::size_t weight_offset(std::size_t layer) const noexcept { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const noexcept {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  Activation output_ = Activation::linear;
  Vector params_;
  std::uint64_t version_ = 0;
};

/// Glorot-uniform weights, zero biases.
Mlp init_mlp(std::vector<std::size_t> layer_sizes, Activation output, RngStream& rng);

struct ForwardCache {
  /// inputs[l] feeds layer l; inputs[0] is the batch itself.
  std::vector<DenseMatrix> inputs;
  std::vector<DenseMatrix> preactivations;
  std::uint64_t version = 0;
  const Mlp* net = nullptr;

  const DenseMatrix& logits() const { return preactivations.back(); }
};

struct ForwardResult {
  DenseMatrix outputs;
  ForwardCache cache;
};

ForwardResult forward(const Mlp& net, const DenseMatrix& batch,
                      kernels::Backend backend = kernels::Backend::parallel);
/// Outputs only, no cache.
DenseMatrix predict(const Mlp& net, const DenseMatrix& batch,
                    kernels::Backend backend = kernels::Backend::parallel);

enum class GradientAt { output, logit };

struct Gradients {
  Vector parameters;
  DenseMatrix input;
};

/// Reverse pass. `upstream` is dL/d(output) or, with GradientAt::logit,
/// dL/d(pre-activation of the last layer). Batch averaging is the caller's
/// job: upstream rows already carry their 1/N weight.
Gradients backward(const Mlp& net, const ForwardCache& cache, const DenseMatrix& upstream,
                   GradientAt at = GradientAt::output,
                   kernels::Backend backend = kernels::Backend::parallel);

class StaleCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace siva::nn
