#include "siva/spectral/metrics.hpp"

#include <fmt/format.h>

#include "siva/numerics/dense_matrix.hpp"

namespace siva::spectral {

double tip_mse(std::span<const double> exact, std::span<const double> simulated) {
  if (exact.size() != simulated.size())
    throw num::DimensionError(
        fmt::format("tip_mse: lengths {} and {} differ", exact.size(), simulated.size()));
  if (exact.empty()) throw num::DimensionError("tip_mse: empty records");
  double s = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double d = exact[i] - simulated[i];
    s += d * d;
  }
  return s / static_cast<double>(exact.size());
}

}  // namespace siva::spectral
