#include <cmath>

#include "doctest.h"
#include "siva/beam/beam_model.hpp"
#include "siva/numerics/linalg.hpp"
#include "siva/reduction/guyan.hpp"
#include "siva/sindy/sindy.hpp"

using namespace siva;
using num::DenseMatrix;
using num::Vector;

namespace {

struct Reduced {
  beam::FullModel model = beam::build_full_model(beam::BeamSpec{});
  reduction::ReducedModel reduced;
  Reduced() {
    const auto modal = beam::modal_analysis(model);
    const auto damping = beam::build_damping(model, modal.frequencies_hz,
                                             beam::reference_damping_ratios(), modal.shapes);
    reduced = reduction::guyan_reduce(model, damping, reduction::select_translational(model));
  }
};

const Reduced& fixture() {
  static const Reduced r;
  return r;
}

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, unsigned seed) {
  DenseMatrix a(rows, cols);
  unsigned s = seed;
  for (double& v : a.data()) {
    s = s * 1103515245u + 12345u;
    v = static_cast<double>((s >> 8) & 0xffff) / 65536.0 - 0.5;
  }
  return a;
}

}  // namespace

TEST_CASE("library layout and values") {
  sim::TrajectorySet d;
  d.times = {0.0, 0.1};
  d.q = DenseMatrix{{1.0, 2.0, 3.0}, {-1.0, 0.5, -2.0}};
  d.qd = DenseMatrix{{4.0, 5.0, 6.0}, {7.0, 8.0, 9.0}};
  d.qdd = DenseMatrix(2, 3);
  d.tip_column = 2;
  const auto lib = sindy::build_library(d);
  REQUIRE(lib.column_count() == 2 * 3 + 4);
  CHECK(lib.labels.front() == "qd_1");
  CHECK(lib.labels[3] == "q_1");
  CHECK(lib.labels.back() == "q_N^5");
  CHECK(lib.theta(0, 1) == 5.0);
  CHECK(lib.theta(1, 5) == -2.0);
  CHECK(lib.theta(1, lib.index_of("q_N^3")) == -8.0);
  CHECK(lib.theta(0, lib.index_of("q_N^5")) == 243.0);
  CHECK_THROWS_AS(lib.index_of("q_N^6"), std::out_of_range);

  sim::TrajectorySet full;
  full.times = Vector(4, 0.0);
  full.q = full.qd = full.qdd = DenseMatrix(4, 15);
  full.tip_column = 14;
  CHECK(sindy::build_library(full).column_count() == 34);
}

TEST_CASE("zero threshold reproduces ordinary least squares") {
  const auto a = random_matrix(60, 6, 7);
  Vector y(60);
  for (std::size_t r = 0; r < 60; ++r) y[r] = std::sin(0.3 * static_cast<double>(r));
  const auto ols = num::least_squares(a, y);
  const auto st = sindy::stlsq(a, y, {.threshold = 0.0, .max_iterations = 20});
  CHECK(st.converged);
  CHECK(st.active_count() == 6);
  for (std::size_t j = 0; j < 6; ++j)
    CHECK(st.coefficients[j] == doctest::Approx(ols.coefficients[j]).epsilon(1e-10));
}

TEST_CASE("sparse recovery zeros inactive terms exactly") {
  const auto a = random_matrix(200, 8, 11);
  Vector y(200);
  for (std::size_t r = 0; r < 200; ++r)
    y[r] = 3.0 * a(r, 0) - 2.0 * a(r, 5) + 1e-4 * std::cos(static_cast<double>(r));
  const auto st = sindy::stlsq(a, y);
  CHECK(st.converged);
  CHECK(st.coefficients[0] == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(st.coefficients[5] == doctest::Approx(-2.0).epsilon(1e-3));
  for (const std::size_t j : {1, 2, 3, 4, 6, 7}) {
    CHECK(st.coefficients[j] == 0.0);
    CHECK_FALSE(st.active[j]);
  }
}

TEST_CASE("threshold above every coefficient empties the model") {
  const auto a = random_matrix(50, 4, 3);
  Vector y(50);
  for (std::size_t r = 0; r < 50; ++r) y[r] = a(r, 0) + a(r, 1);
  const auto st = sindy::stlsq(a, y, {.threshold = 10.0});
  CHECK(st.active_count() == 0);
  for (double c : st.coefficients) CHECK(c == 0.0);
}

TEST_CASE("degenerate columns and targets") {
  auto a = random_matrix(40, 4, 5);
  for (std::size_t r = 0; r < 40; ++r) {
    a(r, 1) = 0.0;
    a(r, 3) = 2.0 * a(r, 0);
  }
  Vector y(40);
  for (std::size_t r = 0; r < 40; ++r) y[r] = a(r, 2);
  const auto st = sindy::stlsq(a, y, {.threshold = 0.0});
  CHECK(st.dropped_columns.size() == 2);
  CHECK(st.warnings.size() == 2);
  CHECK(st.coefficients[1] == 0.0);
  CHECK(st.coefficients[2] == doctest::Approx(1.0));
  CHECK(st.coefficients[0] * 1.0 + st.coefficients[3] * 2.0 == doctest::Approx(0.0).scale(1.0));

  const Vector zero(40, 0.0);
  const auto z = sindy::stlsq(a, zero);
  CHECK(z.active_count() == 0);
  CHECK(z.converged);

  CHECK_THROWS_AS(sindy::stlsq(a, Vector(39, 1.0)), num::DimensionError);
  CHECK_THROWS(sindy::stlsq(a, y, {.threshold = -1.0}));
  CHECK_THROWS(sindy::stlsq(a, y, {.threshold = 0.05, .max_iterations = 0}));
}

TEST_CASE("attachment recovered from data generated by the reduced model itself") {
  const auto& red = fixture().reduced;
  sim::GridSpec grid;
  grid.duration = 0.5;
  const auto data = sim::simulate_reduced(red, sim::AttachmentSpec::linear_cubic(1.1e4, 1e8),
                                          2000.0, 0.00635, grid);
  const auto fit = sindy::fit_attachment(red, data, {.threshold = 0.0});
  CHECK(fit.rows_used < data.sample_count());
  CHECK(fit.library.column_count() == 34);
  CHECK(fit.lambda[0] == doctest::Approx(1.1e4).epsilon(1e-3));
  CHECK(fit.lambda[2] == doctest::Approx(1e8).epsilon(1e-3));
  CHECK(std::abs(fit.lambda[1]) < 1e3);
}
