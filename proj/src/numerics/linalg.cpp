#include "siva/numerics/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace siva::num {

SingularMatrixError::SingularMatrixError(std::size_t column, double pivot)
    : NumericalError("singular matrix: pivot " + std::to_string(pivot) + " at column " +
                     std::to_string(column)),
      column_(column) {}

NotPositiveDefiniteError::NotPositiveDefiniteError(std::size_t minor_index)
    : NumericalError("matrix is not positive definite: leading minor " +
                     std::to_string(minor_index + 1) + " is not positive"),
      minor_index_(minor_index) {}

// ---------------------------------------------------------------------------
// LU

LuFactorization::LuFactorization(const DenseMatrix& a) : lu_(a), perm_(a.rows()) {
  if (!a.is_square()) throw DimensionError("LU: matrix must be square");
  const std::size_t n = a.rows();
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  const double tiny = 1e-14 * a.norm_inf();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > best) {
        best = std::abs(lu_(i, k));
        p = i;
      }
    }
    if (!(best > tiny)) throw SingularMatrixError(k, best);
    if (p != k) {
      std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
      std::swap(perm_[k], perm_[p]);
    }
    const double pivot = lu_(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) / pivot;
      lu_(i, k) = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
    }
  }
}

void LuFactorization::solve_in_place(std::span<double> b) const {
  const std::size_t n = dim();
  if (b.size() != n) throw DimensionError("LU solve: right-hand side length mismatch");
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
    x[i] = s / lu_(i, i);
  }
  std::copy(x.begin(), x.end(), b.begin());
}

DenseMatrix LuFactorization::solve(const DenseMatrix& b) const {
  if (b.rows() != dim()) throw DimensionError("LU solve: row count mismatch");
  DenseMatrix x(b.rows(), b.cols());
  Vector col;
  for (std::size_t j = 0; j < b.cols(); ++j) {
    col = b.col(j);
    solve_in_place(col);
    x.set_col(j, col);
  }
  return x;
}

DenseMatrix solve_linear(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.is_square()) throw DimensionError("solve_linear: A must be square");
  if (b.rows() != a.rows()) throw DimensionError("solve_linear: B row count mismatch");
  return LuFactorization(a).solve(b);
}

// ---------------------------------------------------------------------------
// Cholesky

Cholesky::Cholesky(const DenseMatrix& a, double rel_tol) : l_(a.rows(), a.cols()) {
  if (!a.is_square()) throw DimensionError("Cholesky: matrix must be square");
  const std::size_t n = a.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  const double floor = rel_tol * max_diag;
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
    if (!(d > floor) || !(d > 0.0)) throw NotPositiveDefiniteError(j);
    const double ljj = std::sqrt(d);
    l_(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
      l_(i, j) = s / ljj;
    }
  }
}

void Cholesky::forward_in_place(std::span<double> x) const {
  const std::size_t n = dim();
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * x[k];
    x[i] = s / l_(i, i);
  }
}

void Cholesky::backward_in_place(std::span<double> x) const {
  const std::size_t n = dim();
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l_(k, i) * x[k];
    x[i] = s / l_(i, i);
  }
}

void Cholesky::solve_in_place(std::span<double> b) const {
  if (b.size() != dim()) throw DimensionError("Cholesky solve: length mismatch");
  forward_in_place(b);
  backward_in_place(b);
}

DenseMatrix Cholesky::solve(const DenseMatrix& b) const {
  if (b.rows() != dim()) throw DimensionError("Cholesky solve: row count mismatch");
  DenseMatrix x(b.rows(), b.cols());
  Vector col;
  for (std::size_t j = 0; j < b.cols(); ++j) {
    col = b.col(j);
    solve_in_place(col);
    x.set_col(j, col);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Symmetric eigenproblem: Householder reduction to tridiagonal form followed by
// implicit QL with accumulated transformations.

namespace {

void tridiagonalize(DenseMatrix& v, Vector& d, Vector& e) {
  const std::size_t n = v.rows();
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

void implicit_ql(DenseMatrix& v, Vector& d, Vector& e) {
  const std::size_t n = v.rows();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 60) throw NumericalError("eig_sym: QL iteration failed to converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = m; i-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (std::size_t k = 0; k < n; ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = s * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace

SymmetricEigen eig_sym(const DenseMatrix& a) {
  if (!a.is_square()) throw DimensionError("eig_sym: matrix must be square");
  const std::size_t n = a.rows();
  if (n == 0) return {};
  DenseMatrix v = a;
  // symmetrize from the lower triangle
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) v(i, j) = v(j, i);
  Vector d(n), e(n);
  if (n == 1) {
    return {{a(0, 0)}, DenseMatrix::identity(1)};
  }
  tridiagonalize(v, d, e);
  implicit_ql(v, d, e);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });
  SymmetricEigen out{Vector(n), DenseMatrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = d[order[c]];
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

SymmetricEigen eig_sym_generalized(const DenseMatrix& k, const DenseMatrix& m) {
  if (!k.is_square() || !m.is_square() || k.rows() != m.rows())
    throw DimensionError("eig_sym_generalized: K and M must be square and of equal size");
  const std::size_t n = k.rows();
  const Cholesky chol(m);

  // C = L^{-1} K L^{-T}
  DenseMatrix x(n, n);
  Vector col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = k(i, j);
    chol.forward_in_place(col);
    for (std::size_t i = 0; i < n; ++i) x(j, i) = col[i];  // store transposed
  }
  DenseMatrix c(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = x(i, j);
    chol.forward_in_place(col);
    for (std::size_t i = 0; i < n; ++i) c(i, j) = col[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = s;
      c(j, i) = s;
    }

  SymmetricEigen std_eig = eig_sym(c);
  for (std::size_t j = 0; j < n; ++j) {
    col = std_eig.vectors.col(j);
    chol.backward_in_place(col);
    // fix the sign so the largest-magnitude entry is positive
    std::size_t imax = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(col[i]) > std::abs(col[imax])) imax = i;
    if (col[imax] < 0)
      for (double& v : col) v = -v;
    std_eig.vectors.set_col(j, col);
  }
  return std_eig;
}

// ---------------------------------------------------------------------------
// Least squares

LeastSquaresResult least_squares(const DenseMatrix& a, std::span<const double> b,
                                 double rel_rank_tol) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (b.size() != m) throw DimensionError("least_squares: right-hand side length mismatch");
  DenseMatrix r = a;
  Vector qtb(b.begin(), b.end());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  auto column_norm2 = [&](std::size_t j, std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < m; ++i) s += r(i, j) * r(i, j);
    return s;
  };

  const std::size_t steps = std::min(m, n);
  std::size_t rank = 0;
  double r00 = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    std::size_t p = k;
    double best = column_norm2(k, k);
    for (std::size_t j = k + 1; j < n; ++j) {
      const double nj = column_norm2(j, k);
      if (nj > best) {
        best = nj;
        p = j;
      }
    }
    const double alpha_abs = std::sqrt(best);
    if (k == 0) r00 = alpha_abs;
    if (alpha_abs == 0.0 || alpha_abs <= rel_rank_tol * r00) break;
    if (p != k) {
      for (std::size_t i = 0; i < m; ++i) std::swap(r(i, k), r(i, p));
      std::swap(perm[k], perm[p]);
    }
    const double alpha = r(k, k) > 0 ? -alpha_abs : alpha_abs;
    // Householder vector v = x - alpha e1, stored in place below the diagonal.
    r(k, k) -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) vnorm2 += r(i, k) * r(i, k);
    if (vnorm2 > 0.0) {
      for (std::size_t j = k + 1; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += r(i, k) * r(i, j);
        s = 2.0 * s / vnorm2;
        for (std::size_t i = k; i < m; ++i) r(i, j) -= s * r(i, k);
      }
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += r(i, k) * qtb[i];
      s = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < m; ++i) qtb[i] -= s * r(i, k);
    }
    r(k, k) = alpha;
    ++rank;
  }

  Vector x(rank, 0.0);
  for (std::size_t i = rank; i-- > 0;) {
    double s = qtb[i];
    for (std::size_t j = i + 1; j < rank; ++j) s -= r(i, j) * x[j];
    x[i] = s / r(i, i);
  }
  LeastSquaresResult out;
  out.coefficients.assign(n, 0.0);
  out.rank = rank;
  for (std::size_t i = 0; i < rank; ++i) out.coefficients[perm[i]] = x[i];
  for (std::size_t i = rank; i < n; ++i) out.dropped_columns.push_back(perm[i]);
  std::sort(out.dropped_columns.begin(), out.dropped_columns.end());
  return out;
}

}  // namespace siva::num
