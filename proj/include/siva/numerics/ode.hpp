#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "siva/numerics/dense_matrix.hpp"
#include "siva/numerics/linalg.hpp"

namespace siva::num {

/// dydt = f(t, y). Implementations write every entry of dydt.
using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-8;
  /// Maximum step; zero selects (t_end - t_start) / 10.
  double max_step = 0.0;
  /// Initial step; zero selects an automatic estimate.
  double initial_step = 0.0;
  double min_step = 1e-14;
};

struct OdeStats {
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;
};

struct OdeSolution {
  Vector grid_times;
  DenseMatrix states;      // row k = y(grid_times[k])
  DenseMatrix rhs_values;  // row k = f(grid_times[k], states row k)
  OdeStats stats;
};

class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, double time)
      : NumericalError(what + " at t = " + std::to_string(time)), time_(time) {}
  /// Last time at which the solution was valid.
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Dormand-Prince 4(5) with PI step control and the order-4 continuous
/// extension used to sample `output_grid`. The grid must be ascending and lie
/// within [t_start, t_end].
OdeSolution integrate_rk45(const OdeRhs& rhs, std::span<const double> y0, double t_start,
                           double t_end, std::span<const double> output_grid,
                           const OdeOptions& options = {});

/// Uniform grid t_start + k / rate for k = 0 .. round((t_end - t_start) * rate).
Vector uniform_grid(double t_start, double t_end, double rate);

}  // namespace siva::num
