#include "siva/spectral/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>
#include <fmt/format.h>

namespace siva::spectral {

namespace {

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

struct PlanDeleter {
  void operator()(fftw_plan p) const noexcept { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

void check_rate(double fs) {
  if (!(fs > 0.0) || !std::isfinite(fs)) throw std::invalid_argument("sample rate must be positive");
}

}  // namespace

double Spectrum::energy() const noexcept {
  const std::size_t m = magnitudes.size();
  double e = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const bool edge = k == 0 || (sample_count % 2 == 0 && k + 1 == m);
    e += edge ? magnitudes[k] * magnitudes[k] : 0.5 * magnitudes[k] * magnitudes[k];
  }
  return e * static_cast<double>(sample_count);
}

std::size_t Spectrum::peak_bin() const noexcept {
  return static_cast<std::size_t>(std::ranges::max_element(magnitudes) - magnitudes.begin());
}

Spectrum fft_spectrum(std::span<const double> signal, double sample_rate) {
  check_rate(sample_rate);
  const std::size_t n = signal.size();
  if (n < 2) throw std::invalid_argument("fft_spectrum: need at least 2 samples");
  const std::size_t m = n / 2 + 1;
  auto in = fftw_buffer<double>(n);
  auto out = fftw_buffer<fftw_complex>(m);
  Plan plan;
#pragma omp critical(siva_fftw_planner)
  plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  std::ranges::copy(signal, in.get());
  fftw_execute(plan.get());

  Spectrum s;
  s.sample_rate = sample_rate;
  s.sample_count = n;
  s.frequencies.resize(m);
  s.magnitudes.resize(m);
  const double dn = static_cast<double>(n);
  for (std::size_t k = 0; k < m; ++k) {
    s.frequencies[k] = static_cast<double>(k) * sample_rate / dn;
    const bool edge = k == 0 || (n % 2 == 0 && k + 1 == m);
    s.magnitudes[k] = std::hypot(out[k][0], out[k][1]) * (edge ? 1.0 : 2.0) / dn;
  }
  return s;
}

Spectrum fft_spectrum(std::span<const double> times, std::span<const double> signal) {
  if (times.size() != signal.size()) throw num::DimensionError("fft_spectrum: times/signal length mismatch");
  if (times.size() < 2) throw std::invalid_argument("fft_spectrum: need at least 2 samples");
  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  if (!(dt > 0.0)) throw std::invalid_argument("fft_spectrum: times must increase");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (std::abs(times[i] - times[i - 1] - dt) > 1e-6 * dt)
      throw std::invalid_argument(fmt::format("fft_spectrum: non-uniform sampling at index {}", i));
  return fft_spectrum(signal, 1.0 / dt);
}

std::size_t Scalogram::ridge(std::size_t t) const noexcept {
  std::size_t best = 0;
  for (std::size_t f = 1; f < magnitudes.rows(); ++f)
    if (magnitudes(f, t) > magnitudes(best, t)) best = f;
  return best;
}

Vector log_frequency_grid(double f_min, double f_max, std::size_t count) {
  if (!(f_min > 0.0) || !(f_max > f_min) || count < 2)
    throw std::invalid_argument("log_frequency_grid: need 0 < f_min < f_max and count >= 2");
  Vector g(count);
  const double step = std::log(f_max / f_min) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = f_min * std::exp(step * static_cast<double>(i));
  g.back() = f_max;
  return g;
}

Scalogram cwt_morlet(std::span<const double> signal, double sample_rate,
                     std::span<const double> frequencies) {
  check_rate(sample_rate);
  if (frequencies.empty()) throw std::invalid_argument("cwt_morlet: empty frequency grid");
  if (signal.size() < 2) throw std::invalid_argument("cwt_morlet: need at least 2 samples");
  for (double f : frequencies)
    if (!(f > 0.0 && f < 0.5 * sample_rate))
      throw std::invalid_argument(fmt::format("cwt_morlet: {} Hz outside (0, {}) Hz", f, 0.5 * sample_rate));

  const std::size_t n = signal.size(), p = 2 * n, nf = frequencies.size();
  using cplx = std::complex<double>;
  static_assert(sizeof(cplx) == sizeof(fftw_complex));

  auto spec = fftw_buffer<fftw_complex>(p);
  auto work = fftw_buffer<fftw_complex>(p);
  Plan fwd, inv;
#pragma omp critical(siva_fftw_planner)
  {
    fwd.reset(fftw_plan_dft_1d(static_cast<int>(p), spec.get(), spec.get(), FFTW_FORWARD, FFTW_ESTIMATE));
    inv.reset(fftw_plan_dft_1d(static_cast<int>(p), work.get(), work.get(), FFTW_BACKWARD, FFTW_ESTIMATE));
  }
  for (std::size_t i = 0; i < p; ++i) {
    spec[i][0] = i < n ? signal[i] : 0.0;
    spec[i][1] = 0.0;
  }
  fftw_execute(fwd.get());

  Scalogram sc;
  sc.frequencies.assign(frequencies.begin(), frequencies.end());
  sc.times.resize(n);
  for (std::size_t i = 0; i < n; ++i) sc.times[i] = static_cast<double>(i) / sample_rate;
  sc.magnitudes = DenseMatrix(nf, n);

  const double dw = 2.0 * std::numbers::pi * sample_rate / static_cast<double>(p);
  const auto* x = reinterpret_cast<const cplx*>(spec.get());
#pragma omp parallel
  {
    auto buf = fftw_buffer<fftw_complex>(p);
    auto* y = reinterpret_cast<cplx*>(buf.get());
#pragma omp for schedule(static)
    for (std::size_t fi = 0; fi < nf; ++fi) {
      // Amplitude-preserving normalization: a unit tone at f reads 1.
      const double scale = kMorletOmega0 / (2.0 * std::numbers::pi * frequencies[fi]);
      for (std::size_t k = 0; k < p; ++k) {
        const double w = k <= p / 2 ? dw * static_cast<double>(k) : 0.0;
        const double u = scale * w - kMorletOmega0;
        y[k] = w > 0.0 ? x[k] * (2.0 * std::exp(-0.5 * u * u)) : cplx{};
      }
      fftw_execute_dft(inv.get(), buf.get(), buf.get());
      const double inv_p = 1.0 / static_cast<double>(p);
      for (std::size_t t = 0; t < n; ++t) sc.magnitudes(fi, t) = std::abs(y[t]) * inv_p;
    }
  }
  const double peak = sc.magnitudes.max_abs();
  if (peak > 0.0) sc.magnitudes *= 1.0 / peak;
  return sc;
}

}  // namespace siva::spectral
