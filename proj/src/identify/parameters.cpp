#include "siva/identify/parameters.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace siva::ident {

bool ParameterVector::all_finite() const noexcept {
  for (double v : k)
    if (!std::isfinite(v)) return false;
  return true;
}

double ParameterVector::restoring_force(double u) const noexcept {
  double f = 0.0;
  for (std::size_t i = kParameterCount; i-- > 0;) f = (f + k[i]) * u;
  return f;
}

std::string to_string(const ParameterVector& p) {
  return fmt::format("[{:.6g}, {:.6g}, {:.6g}, {:.6g}, {:.6g}]", p[0], p[1], p[2], p[3], p[4]);
}

ParameterVector GeneratedBatch::row(std::size_t i) const {
  ParameterVector p;
  for (std::size_t j = 0; j < kParameterCount; ++j) p[j] = k(i, j);
  return p;
}

ParameterVector GeneratedBatch::mean() const {
  ParameterVector p;
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = 0; j < kParameterCount; ++j) p[j] += k(i, j);
  for (double& v : p.k) v /= static_cast<double>(size());
  return p;
}

GeneratedBatch generate_parameters(const nn::Mlp& generator, const DenseMatrix& z,
                                   const std::string& context, nn::kernels::Backend backend) {
  if (generator.output_size() != 2 * kParameterCount)
    throw num::DimensionError(fmt::format("generator must emit {} outputs, has {}",
                                          2 * kParameterCount, generator.output_size()));
  auto fr = nn::forward(generator, z, backend);
  GeneratedBatch b{std::move(fr.outputs), DenseMatrix(z.rows(), kParameterCount),
                   std::move(fr.cache)};
  for (std::size_t r = 0; r < b.size(); ++r) {
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      const double v = compose(b.raw(r, 2 * i), b.raw(r, 2 * i + 1));
      if (!std::isfinite(v))
        throw NonFiniteParameterError(
            fmt::format("{}{}non-finite k{} (a = {}, b = {}) in sample {}", context,
                        context.empty() ? "" : ": ", i + 1, b.raw(r, 2 * i), b.raw(r, 2 * i + 1), r));
      b.k(r, i) = v;
    }
  }
  return b;
}

DenseMatrix compose_backward(const GeneratedBatch& batch, const DenseMatrix& grad_k) {
  if (grad_k.rows() != batch.size() || grad_k.cols() != kParameterCount)
    throw num::DimensionError("compose_backward: gradient shape mismatch");
  DenseMatrix g(batch.size(), 2 * kParameterCount);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      const double gk = grad_k(r, i);
      g(r, 2 * i) = gk * std::pow(10.0, batch.raw(r, 2 * i + 1));
      g(r, 2 * i + 1) = gk * batch.k(r, i) * std::numbers::ln10;
    }
  }
  return g;
}

}  // namespace siva::ident
