#include "siva/numerics/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace siva::num {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> kC = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// Difference between the 5th- and 4th-order weights.
constexpr std::array<double, 7> kE = {-71.0 / 57600,  0.0,       71.0 / 16695, -71.0 / 1920,
                                      17253.0 / 339200, -22.0 / 525, 1.0 / 40};
// Continuous extension: y(t + s h) = y + h * sum_i k_i * (P_i . [s, s^2, s^3, s^4]).
constexpr double kP[7][4] = {
    {1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608,
     -12715105075.0 / 11282082432},
    {0.0, 0.0, 0.0, 0.0},
    {0.0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933,
     87487479700.0 / 32700410799},
    {0.0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
    {0.0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408,
     701980252875.0 / 199316789632},
    {0.0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
    {0.0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423},
};

constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kMaxGrowth = 5.0;   // h_new <= 5 h
constexpr double kMaxShrink = 10.0;  // h_new >= h / 10

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Vector uniform_grid(double t_start, double t_end, double rate) {
  const auto n = static_cast<std::size_t>(std::llround((t_end - t_start) * rate));
  Vector g(n + 1);
  for (std::size_t k = 0; k <= n; ++k) g[k] = t_start + static_cast<double>(k) / rate;
  return g;
}

OdeSolution integrate_rk45(const OdeRhs& rhs, std::span<const double> y0, double t_start,
                           double t_end, std::span<const double> output_grid,
                           const OdeOptions& options) {
  const std::size_t n = y0.size();
  if (!(t_end > t_start)) throw std::invalid_argument("integrate_rk45: t_end must exceed t_start");
  for (std::size_t k = 0; k < output_grid.size(); ++k) {
    if (output_grid[k] < t_start || output_grid[k] > t_end)
      throw std::invalid_argument("integrate_rk45: output grid outside the integration span");
    if (k > 0 && !(output_grid[k] > output_grid[k - 1]))
      throw std::invalid_argument("integrate_rk45: output grid must be strictly increasing");
  }

  OdeSolution sol;
  sol.grid_times.assign(output_grid.begin(), output_grid.end());
  sol.states = DenseMatrix(output_grid.size(), n);
  sol.rhs_values = DenseMatrix(output_grid.size(), n);

  const double span = t_end - t_start;
  const double max_step = options.max_step > 0 ? options.max_step : span / 10.0;
  const double rtol = options.rtol;
  const double atol = options.atol;

  Vector y(y0.begin(), y0.end());
  Vector y_new(n), y_stage(n), err(n);
  std::array<Vector, 7> k;
  for (auto& ki : k) ki.assign(n, 0.0);

  auto eval = [&](double t, std::span<const double> state, std::span<double> out) {
    rhs(t, state, out);
    ++sol.stats.rhs_evaluations;
    if (!all_finite(out)) throw IntegrationError("non-finite right-hand side", t);
  };

  auto scaled_norm = [&](std::span<const double> v, std::span<const double> ref) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      m = std::max(m, std::abs(v[i]) / (atol + rtol * std::abs(ref[i])));
    return m;
  };

  double t = t_start;
  eval(t, y, k[0]);

  // Initial step size estimate.
  double h = options.initial_step;
  if (!(h > 0)) {
    const double d0 = scaled_norm(y, y);
    const double d1 = scaled_norm(k[0], y);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, max_step);
    for (std::size_t i = 0; i < n; ++i) y_stage[i] = y[i] + h0 * k[0][i];
    eval(t + h0, y_stage, k[1]);
    for (std::size_t i = 0; i < n; ++i) err[i] = k[1][i] - k[0][i];
    const double d2 = scaled_norm(err, y) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    h = std::min({100.0 * h0, h1, max_step});
  }

  std::size_t next_out = 0;
  while (next_out < output_grid.size() && output_grid[next_out] <= t_start) {
    std::copy(y.begin(), y.end(), sol.states.row(next_out).begin());
    ++next_out;
  }

  double err_old = 1e-4;
  bool last_rejected = false;
  while (t < t_end) {
    if (h < options.min_step)
      throw IntegrationError("step size underflow (stiff or unbounded solution)", t);
    bool final_step = false;
    if (t + h >= t_end) {
      h = t_end - t;
      final_step = true;
    }

    for (std::size_t s = 1; s < 7; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s; ++j) acc += kA[s][j] * k[j][i];
        y_stage[i] = y[i] + h * acc;
      }
      if (s == 6) std::copy(y_stage.begin(), y_stage.end(), y_new.begin());
      eval(t + kC[s] * h, s == 6 ? std::span<const double>(y_new) : y_stage, k[s]);
    }

    double err_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < 7; ++j) e += kE[j] * k[j][i];
      e *= h;
      const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      err_norm = std::max(err_norm, std::abs(e) / sc);
    }

    if (err_norm <= 1.0) {
      const double t_new = final_step ? t_end : t + h;
      // Dense output for grid points in (t, t_new].
      while (next_out < output_grid.size() && output_grid[next_out] <= t_new) {
        const double s = (output_grid[next_out] - t) / h;
        const double pw[4] = {s, s * s, s * s * s, s * s * s * s};
        auto row = sol.states.row(next_out);
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < 7; ++j) {
            if (k[j][i] == 0.0) continue;
            acc += k[j][i] * (kP[j][0] * pw[0] + kP[j][1] * pw[1] + kP[j][2] * pw[2] +
                              kP[j][3] * pw[3]);
          }
          row[i] = y[i] + h * acc;
        }
        if (output_grid[next_out] == t_new)
          std::copy(y_new.begin(), y_new.end(), row.begin());
        ++next_out;
      }
      t = t_new;
      y.swap(y_new);
      k[0].swap(k[6]);  // first-same-as-last
      ++sol.stats.accepted_steps;

      const double fac11 = std::pow(err_norm, kExpo);
      double fac = fac11 / std::pow(err_old, kBeta);
      fac = std::clamp(fac / kSafety, 1.0 / kMaxGrowth, kMaxShrink);
      double h_new = h / fac;
      if (last_rejected) h_new = std::min(h_new, h);
      err_old = std::max(err_norm, 1e-4);
      last_rejected = false;
      h = std::min(h_new, max_step);
    } else {
      ++sol.stats.rejected_steps;
      const double fac11 = std::pow(err_norm, kExpo);
      h /= std::min(kMaxGrowth, fac11 / kSafety);
      last_rejected = true;
    }
  }

  for (std::size_t r = 0; r < output_grid.size(); ++r) {
    rhs(output_grid[r], sol.states.row(r), sol.rhs_values.row(r));
    ++sol.stats.rhs_evaluations;
  }
  return sol;
}

}  // namespace siva::num
