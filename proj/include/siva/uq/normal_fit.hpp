#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include "siva/numerics/dense_matrix.hpp"

namespace siva::uq {

inline constexpr std::size_t kPdfPoints = 601;
inline constexpr double kPdfHalfWidth = 6.0;  // in standard deviations
inline constexpr double kZ95 = 1.96;

struct NormalFit {
  std::string label;
  double mean = 0.0;
  double stddev = 0.0;  // unbiased
  std::size_t sample_count = 0;
  std::pair<double, double> ci95;
  /// Constant samples. The pdf grid then holds a single point carrying unit mass.
  bool degenerate = false;
  num::Vector pdf_x;
  num::Vector pdf;

  bool ci_contains(double value) const noexcept {
    return ci95.first <= value && value <= ci95.second;
  }
};

double normal_pdf(double x, double mean, double stddev) noexcept;

/// Throws std::invalid_argument for fewer than two or non-finite samples.
NormalFit fit_normal(std::span<const double> samples, std::string label = {});

/// Trapezoidal integral of the pdf over its grid (1 for a degenerate fit).
double pdf_mass(const NormalFit& fit);

}  // namespace siva::uq
