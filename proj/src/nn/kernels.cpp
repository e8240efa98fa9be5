#include "siva/nn/kernels.hpp"

#include <cstddef>

namespace siva::nn::kernels {

namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelThreshold = 1 << 14;

inline void forward_row(const DenseMatrix& x, std::span<const double> w, std::span<const double> b,
                        DenseMatrix& z, std::size_t r) {
  const std::size_t in = x.cols();
  const auto xr = x.row(r);
  auto zr = z.row(r);
  for (std::size_t o = 0; o < zr.size(); ++o) {
    const double* wo = w.data() + o * in;
    double s = b[o];
    for (std::size_t i = 0; i < in; ++i) s += wo[i] * xr[i];
    zr[o] = s;
  }
}

inline void weight_grad_row(const DenseMatrix& x, const DenseMatrix& g, std::span<double> dw,
                            std::span<double> db, std::size_t o) {
  const std::size_t in = x.cols();
  double* dwo = dw.data() + o * in;
  for (std::size_t i = 0; i < in; ++i) dwo[i] = 0.0;
  double bsum = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double go = g(r, o);
    bsum += go;
    if (go == 0.0) continue;
    const auto xr = x.row(r);
    for (std::size_t i = 0; i < in; ++i) dwo[i] += go * xr[i];
  }
  db[o] = bsum;
}

inline void input_grad_row(std::span<const double> w, const DenseMatrix& g, DenseMatrix& dx,
                           std::size_t r) {
  const std::size_t in = dx.cols();
  auto dxr = dx.row(r);
  for (std::size_t i = 0; i < in; ++i) dxr[i] = 0.0;
  const auto gr = g.row(r);
  for (std::size_t o = 0; o < gr.size(); ++o) {
    const double go = gr[o];
    if (go == 0.0) continue;
    const double* wo = w.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) dxr[i] += go * wo[i];
  }
}

void check_shapes(const DenseMatrix& x, std::span<const double> w, std::span<const double> b,
                  std::size_t out) {
  if (w.size() != out * x.cols() || b.size() != out)
    throw num::DimensionError("affine kernel: parameter shape mismatch");
}

}  // namespace

namespace serial {

void affine_forward(const DenseMatrix& x, std::span<const double> w, std::span<const double> b,
                    DenseMatrix& z) {
  check_shapes(x, w, b, b.size());
  if (z.rows() != x.rows() || z.cols() != b.size()) z = DenseMatrix(x.rows(), b.size());
  for (std::size_t r = 0; r < x.rows(); ++r) forward_row(x, w, b, z, r);
}

void affine_backward(const DenseMatrix& x, std::span<const double> w, const DenseMatrix& g,
                     std::span<double> dw, std::span<double> db, DenseMatrix* dx) {
  check_shapes(x, w, db, g.cols());
  for (std::size_t o = 0; o < g.cols(); ++o) weight_grad_row(x, g, dw, db, o);
  if (dx) {
    if (dx->rows() != x.rows() || dx->cols() != x.cols()) *dx = DenseMatrix(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) input_grad_row(w, g, *dx, r);
  }
}

}  // namespace serial

namespace parallel {

void affine_forward(const DenseMatrix& x, std::span<const double> w, std::span<const double> b,
                    DenseMatrix& z) {
  check_shapes(x, w, b, b.size());
  if (z.rows() != x.rows() || z.cols() != b.size()) z = DenseMatrix(x.rows(), b.size());
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
  const bool go_parallel = x.rows() * w.size() >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (std::ptrdiff_t r = 0; r < rows; ++r) forward_row(x, w, b, z, static_cast<std::size_t>(r));
}

void affine_backward(const DenseMatrix& x, std::span<const double> w, const DenseMatrix& g,
                     std::span<double> dw, std::span<double> db, DenseMatrix* dx) {
  check_shapes(x, w, db, g.cols());
  const bool go_parallel = x.rows() * w.size() >= kParallelThreshold;
  const auto outs = static_cast<std::ptrdiff_t>(g.cols());
#pragma omp parallel for schedule(static) if (go_parallel)
  for (std::ptrdiff_t o = 0; o < outs; ++o) weight_grad_row(x, g, dw, db, static_cast<std::size_t>(o));
  if (dx) {
    if (dx->rows() != x.rows() || dx->cols() != x.cols()) *dx = DenseMatrix(x.rows(), x.cols());
    const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static) if (go_parallel)
    for (std::ptrdiff_t r = 0; r < rows; ++r) input_grad_row(w, g, *dx, static_cast<std::size_t>(r));
  }
}

}  // namespace parallel

void affine_forward(Backend backend, const DenseMatrix& x, std::span<const double> w,
                    std::span<const double> b, DenseMatrix& z) {
  if (backend == Backend::serial)
    serial::affine_forward(x, w, b, z);
  else
    parallel::affine_forward(x, w, b, z);
}

void affine_backward(Backend backend, const DenseMatrix& x, std::span<const double> w,
                     const DenseMatrix& g, std::span<double> dw, std::span<double> db,
                     DenseMatrix* dx) {
  if (backend == Backend::serial)
    serial::affine_backward(x, w, g, dw, db, dx);
  else
    parallel::affine_backward(x, w, g, dw, db, dx);
}

}  // namespace siva::nn::kernels
