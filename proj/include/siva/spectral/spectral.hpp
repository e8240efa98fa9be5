#pragma once

#include <cstddef>
#include <span>

#include "siva/numerics/dense_matrix.hpp"

namespace siva::spectral {

using num::DenseMatrix;
using num::Vector;

struct Spectrum {
  Vector frequencies;  // Hz, 0..fs/2
  Vector magnitudes;   // one-sided amplitude, signal units
  double sample_rate = 0.0;
  std::size_t sample_count = 0;

  /// Sum of squared samples recovered from the one-sided amplitudes.
  double energy() const noexcept;
  std::size_t peak_bin() const noexcept;
};

/// A unit sine landing on a bin shows up with magnitude 1 there.
Spectrum fft_spectrum(std::span<const double> signal, double sample_rate);
/// Rejects a time grid whose steps differ by more than 1e-6 relative.
Spectrum fft_spectrum(std::span<const double> times, std::span<const double> signal);

inline constexpr double kMorletOmega0 = 6.0;

struct Scalogram {
  Vector times;        // s
  Vector frequencies;  // Hz
  DenseMatrix magnitudes;  // frequencies x times; global max is 1 unless the input is zero

  /// Index of the strongest frequency at time sample t.
  std::size_t ridge(std::size_t t) const noexcept;
};

Vector log_frequency_grid(double f_min = 0.5, double f_max = 500.0, std::size_t count = 200);

/// Analytic Morlet transform, evaluated per frequency by FFT convolution on a
/// zero-padded copy of the signal.
Scalogram cwt_morlet(std::span<const double> signal, double sample_rate,
                     std::span<const double> frequencies);

}  // namespace siva::spectral
