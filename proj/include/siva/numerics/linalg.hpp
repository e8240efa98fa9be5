#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "siva/numerics/dense_matrix.hpp"

namespace siva::num {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrixError : public NumericalError {
 public:
  SingularMatrixError(std::size_t column, double pivot);
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// Raised by Cholesky when the leading minor of order `minor_index + 1` is not positive.
class NotPositiveDefiniteError : public NumericalError {
 public:
  explicit NotPositiveDefiniteError(std::size_t minor_index);
  std::size_t minor_index() const noexcept { return minor_index_; }

 private:
  std::size_t minor_index_;
};

/// LU factorization with partial pivoting.
class LuFactorization {
 public:
  /// Throws SingularMatrixError when a pivot falls below 1e-14 * ||A||_inf.
  explicit LuFactorization(const DenseMatrix& a);

  std::size_t dim() const noexcept { return lu_.rows(); }
  DenseMatrix solve(const DenseMatrix& b) const;
  void solve_in_place(std::span<double> b) const;

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

DenseMatrix solve_linear(const DenseMatrix& a, const DenseMatrix& b);

/// A = L L^T for symmetric positive definite A. Only the lower triangle of A is read.
class Cholesky {
 public:
  explicit Cholesky(const DenseMatrix& a, double rel_tol = 0.0);

  std::size_t dim() const noexcept { return l_.rows(); }
  const DenseMatrix& lower() const noexcept { return l_; }

  void solve_in_place(std::span<double> b) const;
  DenseMatrix solve(const DenseMatrix& b) const;
  /// x <- L^{-1} x
  void forward_in_place(std::span<double> x) const;
  /// x <- L^{-T} x
  void backward_in_place(std::span<double> x) const;

 private:
  DenseMatrix l_;
};

struct SymmetricEigen {
  Vector values;        // ascending
  DenseMatrix vectors;  // column i pairs with values[i]
};

/// Standard symmetric eigenproblem via Householder tridiagonalization and implicit QL.
SymmetricEigen eig_sym(const DenseMatrix& a);

/// K phi = w2 M phi with M symmetric positive definite. Eigenvalues ascending,
/// eigenvectors M-orthonormal.
SymmetricEigen eig_sym_generalized(const DenseMatrix& k, const DenseMatrix& m);

struct LeastSquaresResult {
  Vector coefficients;
  std::size_t rank = 0;
  /// Columns found linearly dependent on earlier ones; their coefficients are zero.
  std::vector<std::size_t> dropped_columns;
};

/// min ||A x - b||_2 via Householder QR with column pivoting. Columns whose
/// pivoted diagonal falls below rel_rank_tol * |R_00| are dropped.
LeastSquaresResult least_squares(const DenseMatrix& a, std::span<const double> b,
                                 double rel_rank_tol = 1e-12);

}  // namespace siva::num
