#include "siva/beam/beam_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "siva/numerics/linalg.hpp"

namespace siva::beam {

namespace {

constexpr std::array<double, 7> kReferenceDamping = {0.0069, 0.0052, 0.0014, 0.0017,
                                                     0.0044, 0.0038, 0.0042};

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ModelError(std::string("beam spec: ") + field + " must be positive and finite");
}

}  // namespace

void BeamSpec::validate() const {
  require_positive(elastic_modulus, "elastic_modulus");
  require_positive(density, "density");
  require_positive(length, "length");
  require_positive(width, "width");
  require_positive(thickness, "thickness");
  if (element_count < 1) throw ModelError("beam spec: element_count must be at least 1");
  if (!(tip_mass >= 0.0) || !std::isfinite(tip_mass))
    throw ModelError("beam spec: tip_mass must be non-negative and finite");
}

ElementMatrices element_matrices(double ei, double rho_a, double l) {
  if (!(ei > 0) || !(rho_a > 0) || !(l > 0))
    throw ModelError("element_matrices: EI, rho*A and element length must be positive");
  const double k = ei / (l * l * l);
  const double m = rho_a * l / 420.0;
  const double l2 = l * l;
  ElementMatrices e;
  e.stiffness = {{{12 * k, 6 * l * k, -12 * k, 6 * l * k},
                  {6 * l * k, 4 * l2 * k, -6 * l * k, 2 * l2 * k},
                  {-12 * k, -6 * l * k, 12 * k, -6 * l * k},
                  {6 * l * k, 2 * l2 * k, -6 * l * k, 4 * l2 * k}}};
  e.mass = {{{156 * m, 22 * l * m, 54 * m, -13 * l * m},
             {22 * l * m, 4 * l2 * m, 13 * l * m, -3 * l2 * m},
             {54 * m, 13 * l * m, 156 * m, -22 * l * m},
             {-13 * l * m, -3 * l2 * m, -22 * l * m, 4 * l2 * m}}};
  return e;
}

FullModel build_full_model(const BeamSpec& spec) {
  spec.validate();
  const std::size_t ne = spec.element_count;
  const double le = spec.length / static_cast<double>(ne);
  const ElementMatrices em = element_matrices(spec.bending_stiffness(), spec.mass_per_length(), le);

  // Node 1 is clamped: global DOF (2 * node + local) shifted down by 2.
  const std::size_t n = 2 * ne;
  FullModel model;
  model.mass = DenseMatrix(n, n);
  model.stiffness = DenseMatrix(n, n);
  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t a = 0; a < 4; ++a) {
      const std::size_t ga = 2 * e + a;
      if (ga < 2) continue;
      for (std::size_t b = 0; b < 4; ++b) {
        const std::size_t gb = 2 * e + b;
        if (gb < 2) continue;
        model.mass(ga - 2, gb - 2) += em.mass[a][b];
        model.stiffness(ga - 2, gb - 2) += em.stiffness[a][b];
      }
    }
  }
  for (std::size_t node = 1; node <= ne; ++node) {
    model.dof_map.push_back({2 * (node - 1), 2 * (node - 1) + 1});
    model.node_positions.push_back(static_cast<double>(node) * le);
  }
  model.mass(model.tip_translation(), model.tip_translation()) += spec.tip_mass;
  return model;
}

ModalData modal_analysis(const FullModel& model) {
  const num::SymmetricEigen eig = num::eig_sym_generalized(model.stiffness, model.mass);
  ModalData out;
  out.frequencies_hz.reserve(eig.values.size());
  for (double w2 : eig.values) {
    if (!(w2 > 0.0))
      throw num::NumericalError("modal_analysis: non-positive eigenvalue for a clamped model");
    out.frequencies_hz.push_back(std::sqrt(w2) / (2.0 * std::numbers::pi));
  }
  out.shapes = eig.vectors;
  return out;
}

std::span<const double> reference_damping_ratios() noexcept { return kReferenceDamping; }

Vector extend_damping_ratios(std::span<const double> ratios, std::size_t mode_count) {
  if (ratios.empty()) throw ModelError("damping ratios: at least one ratio is required");
  if (ratios.size() > mode_count)
    throw ModelError("damping ratios: more ratios (" + std::to_string(ratios.size()) +
                     ") than modes (" + std::to_string(mode_count) + ")");
  Vector out(ratios.begin(), ratios.end());
  out.resize(mode_count, ratios.back());
  return out;
}

DenseMatrix build_damping(const FullModel& model, std::span<const double> frequencies_hz,
                          std::span<const double> ratios, const DenseMatrix& shapes) {
  const std::size_t n = model.dof_count();
  if (shapes.rows() != n || shapes.cols() != frequencies_hz.size())
    throw ModelError("build_damping: mode shapes do not match frequencies or model size");
  const Vector zeta = extend_damping_ratios(ratios, frequencies_hz.size());

  // B = M Phi, C = B diag(2 zeta omega) B^T
  const DenseMatrix b = model.mass * shapes;
  DenseMatrix c(n, n);
  for (std::size_t mode = 0; mode < frequencies_hz.size(); ++mode) {
    const double w = 2.0 * std::numbers::pi * frequencies_hz[mode];
    const double coef = 2.0 * zeta[mode] * w;
    if (coef == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double bi = coef * b(i, mode);
      for (std::size_t j = 0; j < n; ++j) c(i, j) += bi * b(j, mode);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = s;
      c(j, i) = s;
    }
  return c;
}

}  // namespace siva::beam
