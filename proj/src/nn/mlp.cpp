#include "siva/nn/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace siva::nn {

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::sigmoid: return "sigmoid";
    case Activation::leaky_relu: return "leaky_relu";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  if (name == "linear") return Activation::linear;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "leaky_relu") return Activation::leaky_relu;
  throw std::invalid_argument(fmt::format("unknown activation '{}'", name));
}

double apply(Activation a, double x) noexcept {
  switch (a) {
    case Activation::linear: return x;
    case Activation::leaky_relu: return x >= 0.0 ? x : kLeakySlope * x;
    case Activation::sigmoid:
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
  }
  return x;
}

double derivative(Activation a, double x) noexcept {
  switch (a) {
    case Activation::linear: return 1.0;
    case Activation::leaky_relu: return x >= 0.0 ? 1.0 : kLeakySlope;
    case Activation::sigmoid: {
      const double s = apply(a, x);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation output)
    : sizes_(std::move(layer_sizes)), output_(output) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  if (output == Activation::leaky_relu)
    throw std::invalid_argument("Mlp: output activation must be linear or sigmoid");
  std::size_t n = 0;
  for (std::size_t l = 0; l < sizes_.size(); ++l) {
    if (sizes_[l] == 0) throw std::invalid_argument(fmt::format("Mlp: layer {} has zero width", l));
    if (l + 1 < sizes_.size()) {
      offsets_.push_back(n);
      n += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    }
  }
  params_.assign(n, 0.0);
}

std::span<const double> Mlp::weights(std::size_t layer) const noexcept {
  return {params_.data() + weight_offset(layer), sizes_[layer] * sizes_[layer + 1]};
}
std::span<const double> Mlp::biases(std::size_t layer) const noexcept {
  return {params_.data() + bias_offset(layer), sizes_[layer + 1]};
}
std::span<double> Mlp::weights(std::size_t layer) noexcept {
  ++version_;
  return {params_.data() + weight_offset(layer), sizes_[layer] * sizes_[layer + 1]};
}
std::span<double> Mlp::biases(std::size_t layer) noexcept {
  ++version_;
  return {params_.data() + bias_offset(layer), sizes_[layer + 1]};
}

Mlp init_mlp(std::vector<std::size_t> layer_sizes, Activation output, RngStream& rng) {
  Mlp net(std::move(layer_sizes), output);
  const auto& s = net.layer_sizes();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s[l] + s[l + 1]));
    for (double& w : net.weights(l)) w = rng.uniform(-limit, limit);
  }
  return net;
}

namespace {

void check_input(const Mlp& net, const DenseMatrix& batch) {
  if (net.layer_count() == 0) throw std::invalid_argument("forward: empty network");
  if (batch.cols() != net.input_size())
    throw num::DimensionError(
        fmt::format("forward: input width {} but network expects {}", batch.cols(), net.input_size()));
}

DenseMatrix activate(Activation a, const DenseMatrix& z) {
  DenseMatrix out(z.rows(), z.cols());
  auto src = z.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = apply(a, src[i]);
  return out;
}

}  // namespace

ForwardResult forward(const Mlp& net, const DenseMatrix& batch, kernels::Backend backend) {
  check_input(net, batch);
  ForwardResult r;
  r.cache.net = &net;
  r.cache.version = net.version();
  r.cache.inputs.reserve(net.layer_count());
  r.cache.preactivations.reserve(net.layer_count());
  DenseMatrix a = batch;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    DenseMatrix z;
    kernels::affine_forward(backend, a, net.weights(l), net.biases(l), z);
    DenseMatrix next = activate(net.activation(l), z);
    r.cache.inputs.push_back(std::move(a));
    r.cache.preactivations.push_back(std::move(z));
    a = std::move(next);
  }
  r.outputs = std::move(a);
  return r;
}

DenseMatrix predict(const Mlp& net, const DenseMatrix& batch, kernels::Backend backend) {
  check_input(net, batch);
  DenseMatrix a = batch;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    DenseMatrix z;
    kernels::affine_forward(backend, a, net.weights(l), net.biases(l), z);
    a = activate(net.activation(l), z);
  }
  return a;
}

Gradients backward(const Mlp& net, const ForwardCache& cache, const DenseMatrix& upstream,
                   GradientAt at, kernels::Backend backend) {
  if (cache.net != &net || cache.version != net.version() ||
      cache.preactivations.size() != net.layer_count())
    throw StaleCacheError("backward: cache does not belong to the current network parameters");
  const std::size_t rows = cache.inputs.front().rows();
  if (upstream.rows() != rows || upstream.cols() != net.output_size())
    throw num::DimensionError(fmt::format("backward: upstream gradient is {}x{}, expected {}x{}",
                                          upstream.rows(), upstream.cols(), rows,
                                          net.output_size()));
  Gradients g;
  g.parameters.assign(net.parameter_count(), 0.0);
  DenseMatrix delta = upstream;
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    if (l + 1 < net.layer_count() || at == GradientAt::output) {
      const auto z = cache.preactivations[l].data();
      auto d = delta.data();
      const Activation act = net.activation(l);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= derivative(act, z[i]);
    }
    std::span<double> dw(g.parameters.data() + net.weight_offset(l), net.weights(l).size());
    std::span<double> db(g.parameters.data() + net.bias_offset(l), net.biases(l).size());
    DenseMatrix dx;
    kernels::affine_backward(backend, cache.inputs[l], net.weights(l), delta, dw, db, &dx);
    delta = std::move(dx);
  }
  g.input = std::move(delta);
  return g;
}

}  // namespace siva::nn
