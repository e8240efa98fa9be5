#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "siva/numerics/dense_matrix.hpp"

namespace siva::beam {

using num::DenseMatrix;
using num::Vector;

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Uniform clamped-free Euler-Bernoulli beam with a lumped mass at the free end.
struct BeamSpec {
  double elastic_modulus = 180e9;  // Pa
  double density = 7800.0;         // kg/m^3
  double length = 1.524;           // m
  double width = 0.0381;           // m
  double thickness = 0.0064;       // m
  std::size_t element_count = 15;
  double tip_mass = 0.0522;  // kg

  double area() const noexcept { return width * thickness; }
  double second_moment() const noexcept { return width * thickness * thickness * thickness / 12.0; }
  double bending_stiffness() const noexcept { return elastic_modulus * second_moment(); }
  double mass_per_length() const noexcept { return density * area(); }

  /// Throws ModelError naming the first offending field.
  void validate() const;
};

/// Global DOF indices of one free node after clamping.
struct NodeDofs {
  std::size_t translation;
  std::size_t rotation;
};

struct FullModel {
  DenseMatrix mass;
  DenseMatrix stiffness;
  std::vector<NodeDofs> dof_map;  // free nodes 2..N+1, root to tip
  Vector node_positions;          // x of each free node [m]

  std::size_t dof_count() const noexcept { return mass.rows(); }
  std::size_t tip_translation() const { return dof_map.back().translation; }
};

struct ModalData {
  Vector frequencies_hz;  // ascending
  Vector damping_ratios;  // empty until assigned
  DenseMatrix shapes;     // mass-normalized columns
};

struct ElementMatrices {
  std::array<std::array<double, 4>, 4> stiffness;
  std::array<std::array<double, 4>, 4> mass;
};

/// Consistent cubic-Hermite element matrices with DOF order (w1, theta1, w2, theta2).
ElementMatrices element_matrices(double bending_stiffness, double mass_per_length,
                                 double element_length);

FullModel build_full_model(const BeamSpec& spec);

ModalData modal_analysis(const FullModel& model);

/// Measured modal damping ratios for the first seven modes of the reference beam.
std::span<const double> reference_damping_ratios() noexcept;

/// Pads `ratios` to `mode_count` entries by repeating its last value.
Vector extend_damping_ratios(std::span<const double> ratios, std::size_t mode_count);

/// C = M Phi diag(2 zeta_i omega_i) Phi^T M over all modes. Ratios beyond those
/// given are extended with the last supplied value.
DenseMatrix build_damping(const FullModel& model, std::span<const double> frequencies_hz,
                          std::span<const double> ratios, const DenseMatrix& shapes);

}  // namespace siva::beam
