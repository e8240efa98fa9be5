#include "siva/sindy/sindy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "siva/identify/physics.hpp"
#include "siva/numerics/linalg.hpp"

namespace siva::sindy {

std::size_t CandidateLibrary::index_of(std::string_view label) const {
  const auto it = std::ranges::find(labels, label);
  if (it == labels.end()) throw std::out_of_range(fmt::format("no library column '{}'", label));
  return static_cast<std::size_t>(it - labels.begin());
}

CandidateLibrary build_library(const sim::TrajectorySet& data) {
  const std::size_t n = data.dof_count(), rows = data.sample_count();
  if (data.tip_column >= n) throw std::invalid_argument("build_library: tip column out of range");
  CandidateLibrary lib;
  for (std::size_t j = 0; j < n; ++j) lib.labels.push_back(fmt::format("qd_{}", j + 1));
  for (std::size_t j = 0; j < n; ++j) lib.labels.push_back(fmt::format("q_{}", j + 1));
  for (std::size_t p = 2; p <= kMaxPower; ++p) lib.labels.push_back(fmt::format("q_N^{}", p));
  lib.theta = DenseMatrix(rows, lib.labels.size());
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = lib.theta.row(r);
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = data.qd(r, j);
      row[n + j] = data.q(r, j);
    }
    const double u = data.q(r, data.tip_column);
    double v = u;
    for (std::size_t p = 2; p <= kMaxPower; ++p) {
      v *= u;
      row[2 * n + p - 2] = v;
    }
  }
  return lib;
}

void StlsqOptions::validate() const {
  if (!(threshold >= 0.0) || !std::isfinite(threshold))
    throw std::invalid_argument("sindy.threshold must be finite and >= 0");
  if (max_iterations == 0) throw std::invalid_argument("sindy.max_iterations must be at least 1");
}

std::size_t StlsqResult::active_count() const noexcept {
  return static_cast<std::size_t>(std::ranges::count(active, true));
}

StlsqResult stlsq(const DenseMatrix& theta, std::span<const double> target,
                  const StlsqOptions& options) {
  options.validate();
  const std::size_t rows = theta.rows(), cols = theta.cols();
  if (target.size() != rows)
    throw num::DimensionError(fmt::format("stlsq: {} targets for {} rows", target.size(), rows));
  StlsqResult res;
  res.coefficients.assign(cols, 0.0);
  res.active.assign(cols, true);

  const double ynorm = num::norm2(target);
  if (ynorm == 0.0) {
    res.active.assign(cols, false);
    res.converged = true;
    return res;
  }
  Vector cnorm(cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += theta(r, j) * theta(r, j);
    cnorm[j] = std::sqrt(s);
    if (cnorm[j] == 0.0) {
      res.active[j] = false;
      res.dropped_columns.push_back(j);
      res.warnings.push_back(fmt::format("column {} is identically zero", j));
    }
  }
  Vector y(target.begin(), target.end());
  for (double& v : y) v /= ynorm;

  Vector scaled(cols, 0.0);  // coefficients in unit-norm units
  while (res.iterations < options.max_iterations) {
    ++res.iterations;
    std::vector<std::size_t> act;
    for (std::size_t j = 0; j < cols; ++j)
      if (res.active[j]) act.push_back(j);
    std::ranges::fill(scaled, 0.0);
    if (act.empty()) {
      res.converged = true;
      break;
    }
    DenseMatrix a(rows, act.size());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < act.size(); ++c) a(r, c) = theta(r, act[c]) / cnorm[act[c]];
    const auto ls = num::least_squares(a, y);
    for (std::size_t c = 0; c < act.size(); ++c) scaled[act[c]] = ls.coefficients[c];
    for (const std::size_t c : ls.dropped_columns) {
      res.active[act[c]] = false;
      scaled[act[c]] = 0.0;
      res.dropped_columns.push_back(act[c]);
      res.warnings.push_back(fmt::format("column {} is linearly dependent on the active set", act[c]));
    }
    bool changed = !ls.dropped_columns.empty();
    for (const std::size_t j : act) {
      if (res.active[j] && std::abs(scaled[j]) < options.threshold) {
        res.active[j] = false;
        changed = true;
      }
    }
    if (!changed) {
      res.converged = true;
      break;
    }
  }
  for (std::size_t j = 0; j < cols; ++j)
    res.coefficients[j] = res.active[j] ? scaled[j] * ynorm / cnorm[j] : 0.0;
  return res;
}

SindyFit fit_attachment(const reduction::ReducedModel& reduced, const sim::TrajectorySet& data,
                        const StlsqOptions& options) {
  const ident::PhysicsLayer layer(reduced);
  const std::size_t n = layer.dim(), tip = layer.tip_index();
  if (data.dof_count() != n || data.tip_column != tip)
    throw std::invalid_argument("fit_attachment: record does not match the reduced model");

  const auto full = build_library(data);
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < data.sample_count(); ++r)
    if (data.times[r] > data.forcing.end_time()) keep.push_back(r);
  if (keep.size() < full.column_count())
    throw std::invalid_argument("fit_attachment: too few samples after the impact");

  SindyFit fit;
  fit.library.labels = full.labels;
  fit.library.theta = DenseMatrix(keep.size(), full.column_count());
  Vector target(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    std::ranges::copy(full.theta.row(keep[i]), fit.library.theta.row(i).begin());
    target[i] = data.qdd(keep[i], tip);
  }
  fit.rows_used = keep.size();
  fit.regression = stlsq(fit.library.theta, target, options);

  // Tip row of the model: qdd_N = -[M^-1 K]_NN q_N - g_N kappa(q_N) + (other states).
  Vector unit(n, 0.0), zero(n, 0.0), out(n);
  unit[tip] = 1.0;
  layer.base_acceleration(unit, zero, zero, out);
  const double linear_nn = out[tip];  // -[M^-1 K]_NN
  const double g_n = layer.tip_influence()[tip];
  const auto& c = fit.regression.coefficients;
  fit.lambda[0] = -(c[fit.library.index_of(fmt::format("q_{}", tip + 1))] - linear_nn) / g_n;
  for (std::size_t p = 2; p <= kMaxPower; ++p)
    fit.lambda[p - 1] = -c[fit.library.index_of(fmt::format("q_N^{}", p))] / g_n;
  return fit;
}

}  // namespace siva::sindy
