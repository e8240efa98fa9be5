#pragma once

#include <span>

namespace siva::spectral {

/// Mean squared difference of two equally long tip-displacement records [m^2].
double tip_mse(std::span<const double> exact, std::span<const double> simulated);

}  // namespace siva::spectral
