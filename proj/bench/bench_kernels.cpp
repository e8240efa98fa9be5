#include <random>

#include <benchmark/benchmark.h>

#include "siva/identify/physics.hpp"
#include "siva/nn/kernels.hpp"

using namespace siva;
using num::DenseMatrix;
using num::Vector;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = d(rng);
  return m;
}

// Batch 500 through the widest generator layer (64 -> 32) and the
// discriminator input layer (15 -> 64, on 1000 stacked rows).
template <nn::kernels::Backend B>
void affine_forward(benchmark::State& st) {
  std::mt19937_64 rng(1);
  const auto rows = static_cast<std::size_t>(st.range(0)), in = static_cast<std::size_t>(st.range(1)),
             out = static_cast<std::size_t>(st.range(2));
  const auto x = random_matrix(rows, in, rng);
  const auto w = random_matrix(out, in, rng);
  const Vector b(out, 0.1);
  DenseMatrix z(rows, out);
  for (auto _ : st) {
    nn::kernels::affine_forward(B, x, w.data(), b, z);
    benchmark::DoNotOptimize(z.data().data());
  }
}

template <nn::kernels::Backend B>
void affine_backward(benchmark::State& st) {
  std::mt19937_64 rng(2);
  const auto rows = static_cast<std::size_t>(st.range(0)), in = static_cast<std::size_t>(st.range(1)),
             out = static_cast<std::size_t>(st.range(2));
  const auto x = random_matrix(rows, in, rng);
  const auto w = random_matrix(out, in, rng);
  const auto g = random_matrix(rows, out, rng);
  Vector dw(out * in), db(out);
  DenseMatrix dx(rows, in);
  for (auto _ : st) {
    nn::kernels::affine_backward(B, x, w.data(), g, dw, db, &dx);
    benchmark::DoNotOptimize(dx.data().data());
  }
}

// 500 parameter draws against 500 time samples of a 15-DOF record.
template <nn::kernels::Backend B>
void physics_mse(benchmark::State& st) {
  std::mt19937_64 rng(3);
  const std::size_t n = 15, samples = 8001, batch = 500;
  ident::PhysicsData d;
  d.base = random_matrix(samples, n, rng);
  d.measured = random_matrix(samples, n, rng);
  d.tip_q = random_matrix(samples, 1, rng, 1e-2).col(0);
  d.d_norm2.resize(samples);
  d.d_dot_g.resize(samples);
  const auto g = random_matrix(n, 1, rng).col(0);
  d.g_norm2 = num::dot(g, g);
  for (std::size_t t = 0; t < samples; ++t) {
    double s = 0.0, p = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double r = d.base(t, j) - d.measured(t, j);
      s += r * r;
      p += r * g[j];
    }
    d.d_norm2[t] = s;
    d.d_dot_g[t] = p;
  }
  std::vector<std::size_t> idx(batch);
  std::uniform_int_distribution<std::size_t> pick(0, samples - 1);
  for (auto& i : idx) i = pick(rng);
  const auto k = random_matrix(batch, 5, rng, 1e4);
  const bool grad = st.range(0) != 0;
  for (auto _ : st) benchmark::DoNotOptimize(ident::physics_mse(B, d, g, idx, k, grad).loss);
}

constexpr auto kSerial = nn::kernels::Backend::serial;
constexpr auto kParallel = nn::kernels::Backend::parallel;

void affine_shapes(benchmark::internal::Benchmark* b) {
  b->Args({500, 64, 32})->Args({1000, 15, 64});
}

}  // namespace

BENCHMARK(affine_forward<kSerial>)->Apply(affine_shapes);
BENCHMARK(affine_forward<kParallel>)->Apply(affine_shapes);
BENCHMARK(affine_backward<kSerial>)->Apply(affine_shapes);
BENCHMARK(affine_backward<kParallel>)->Apply(affine_shapes);
BENCHMARK(physics_mse<kSerial>)->Arg(0)->Arg(1);
BENCHMARK(physics_mse<kParallel>)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
