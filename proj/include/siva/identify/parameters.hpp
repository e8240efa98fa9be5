#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "siva/nn/mlp.hpp"
#include "siva/numerics/dense_matrix.hpp"

namespace siva::ident {

using num::DenseMatrix;
using num::Vector;

inline constexpr std::size_t kParameterCount = 5;

/// Attachment stiffness coefficients k1 [N/m] .. k5 [N/m^5].
struct ParameterVector {
  std::array<double, kParameterCount> k{};

  double& operator[](std::size_t i) noexcept { return k[i]; }
  double operator[](std::size_t i) const noexcept { return k[i]; }
  bool all_finite() const noexcept;
  /// sum_i k_i u^i
  double restoring_force(double u) const noexcept;

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;
};

std::string to_string(const ParameterVector& p);

/// k = a * 10^b.
inline double compose(double a, double b) noexcept { return a * std::pow(10.0, b); }

/// Generator outputs interpreted as [a1, b1, ..., a5, b5], one row per sample.
struct GeneratedBatch {
  DenseMatrix raw;  // n x 10
  DenseMatrix k;    // n x 5
  nn::ForwardCache cache;

  std::size_t size() const noexcept { return k.rows(); }
  ParameterVector row(std::size_t i) const;
  ParameterVector mean() const;
};

class NonFiniteParameterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the generator on `z` and composes k. Throws NonFiniteParameterError
/// (with `context` in the message) if any composed value is not finite.
GeneratedBatch generate_parameters(const nn::Mlp& generator, const DenseMatrix& z,
                                   const std::string& context = {},
                                   nn::kernels::Backend backend = nn::kernels::Backend::parallel);

/// Chain rule through the composition: dL/dk (n x 5) -> dL/d(raw) (n x 10).
DenseMatrix compose_backward(const GeneratedBatch& batch, const DenseMatrix& grad_k);

}  // namespace siva::ident
