#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "siva/identify/parameters.hpp"
#include "siva/numerics/dense_matrix.hpp"
#include "siva/reduction/guyan.hpp"
#include "siva/simulate/simulate.hpp"

namespace siva::sindy {

using num::DenseMatrix;
using num::Vector;

/// Candidate functions: every velocity, every displacement, then the tip
/// displacement raised to powers 2..5.
struct CandidateLibrary {
  std::vector<std::string> labels;
  DenseMatrix theta;  // samples x columns, unscaled

  std::size_t column_count() const noexcept { return labels.size(); }
  std::size_t index_of(std::string_view label) const;
};

inline constexpr std::size_t kMaxPower = 5;

CandidateLibrary build_library(const sim::TrajectorySet& data);

struct StlsqOptions {
  /// Applied to coefficients of unit-norm columns against a unit-norm target.
  double threshold = 0.05;
  std::size_t max_iterations = 20;

  void validate() const;
};

struct StlsqResult {
  Vector coefficients;  // unscaled; inactive entries are exactly 0
  std::vector<bool> active;
  std::size_t iterations = 0;
  bool converged = false;
  /// Columns removed because they were zero or linearly dependent.
  std::vector<std::size_t> dropped_columns;
  std::vector<std::string> warnings;

  std::size_t active_count() const noexcept;
};

/// Sequentially thresholded least squares.
StlsqResult stlsq(const DenseMatrix& theta, std::span<const double> target,
                  const StlsqOptions& options = {});

struct SindyFit {
  CandidateLibrary library;
  StlsqResult regression;
  /// Attachment coefficients implied by the tip-row regression.
  ident::ParameterVector lambda;
  std::size_t rows_used = 0;
};

/// Regresses the tip acceleration of `data` on the library, using only samples
/// after the impact has ended, and converts the tip-displacement terms into
/// attachment stiffnesses using the reduced model's known linear part.
SindyFit fit_attachment(const reduction::ReducedModel& reduced, const sim::TrajectorySet& data,
                        const StlsqOptions& options = {});

}  // namespace siva::sindy
