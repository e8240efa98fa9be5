#pragma once

#include <span>

#include "siva/numerics/dense_matrix.hpp"

// Dense-layer kernels. Each has a straightforward serial reference and an
// OpenMP version. Every output element is accumulated in the same index order
// in both, so the two agree bit for bit at any thread count.

namespace siva::nn::kernels {

using num::DenseMatrix;

enum class Backend { serial, parallel };

namespace serial {

/// Z = X W^T + b, with W stored out x in.
void affine_forward(const DenseMatrix& x, std::span<const double> w, std::span<const double> b,
                    DenseMatrix& z);
/// dW = G^T X, db = column sums of G, dX = G W (dX skipped when null).
void affine_backward(const DenseMatrix& x, std::span<const double> w, const DenseMatrix& g,
                     std::span<double> dw, std::span<double> db, DenseMatrix* dx);

}  // namespace serial

namespace parallel {

void affine_forward(const DenseMatrix& x, std::span<const double> w, std::span<const double> b,
                    DenseMatrix& z);
void affine_backward(const DenseMatrix& x, std::span<const double> w, const DenseMatrix& g,
                     std::span<double> dw, std::span<double> db, DenseMatrix* dx);

}  // namespace parallel

void affine_forward(Backend backend, const DenseMatrix& x, std::span<const double> w,
                    std::span<const double> b, DenseMatrix& z);
void affine_backward(Backend backend, const DenseMatrix& x, std::span<const double> w,
                     const DenseMatrix& g, std::span<double> dw, std::span<double> db,
                     DenseMatrix* dx);

}  // namespace siva::nn::kernels
