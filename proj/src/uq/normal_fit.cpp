#include "siva/uq/normal_fit.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace siva::uq {

double normal_pdf(double x, double mean, double stddev) noexcept {
  const double u = (x - mean) / stddev;
  return std::exp(-0.5 * u * u) / (stddev * std::sqrt(2.0 * std::numbers::pi));
}

NormalFit fit_normal(std::span<const double> samples, std::string label) {
  if (samples.size() < 2)
    throw std::invalid_argument(
        fmt::format("fit_normal{}: need at least 2 samples, got {}",
                    label.empty() ? "" : fmt::format(" ({})", label), samples.size()));
  NormalFit f;
  f.label = std::move(label);
  f.sample_count = samples.size();
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("fit_normal: non-finite sample");
    sum += s;
  }
  f.mean = sum / n;
  double ss = 0.0;
  for (double s : samples) ss += (s - f.mean) * (s - f.mean);
  f.stddev = std::sqrt(ss / (n - 1.0));
  f.ci95 = {f.mean - kZ95 * f.stddev, f.mean + kZ95 * f.stddev};

  // Rounding can leave a tiny spread on equal samples; treat anything below
  // a few ulps of the mean as a point mass.
  if (f.stddev <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f.mean)) {
    f.stddev = 0.0;
    f.ci95 = {f.mean, f.mean};
    f.degenerate = true;
    f.pdf_x = {f.mean};
    f.pdf = {1.0};
    return f;
  }
  f.pdf_x.resize(kPdfPoints);
  f.pdf.resize(kPdfPoints);
  const double lo = f.mean - kPdfHalfWidth * f.stddev;
  const double step = 2.0 * kPdfHalfWidth * f.stddev / static_cast<double>(kPdfPoints - 1);
  for (std::size_t i = 0; i < kPdfPoints; ++i) {
    f.pdf_x[i] = lo + step * static_cast<double>(i);
    f.pdf[i] = normal_pdf(f.pdf_x[i], f.mean, f.stddev);
  }
  f.pdf_x.back() = f.mean + kPdfHalfWidth * f.stddev;
  return f;
}

double pdf_mass(const NormalFit& fit) {
  if (fit.degenerate) return 1.0;
  double area = 0.0;
  for (std::size_t i = 1; i < fit.pdf_x.size(); ++i)
    area += 0.5 * (fit.pdf[i] + fit.pdf[i - 1]) * (fit.pdf_x[i] - fit.pdf_x[i - 1]);
  return area;
}

}  // namespace siva::uq
