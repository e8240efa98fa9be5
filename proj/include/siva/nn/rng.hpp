#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace siva::nn {

/// Seedable stream of uniform and standard-normal draws. The engine is
/// std::mt19937_64 (fully specified by the standard) and normals come from the
/// Box-Muller transform, so the sequence is identical on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 42);

  static constexpr std::string_view algorithm() noexcept { return "mt19937_64/box-muller"; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t draws() const noexcept { return draws_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  void fill_normal(std::span<double> out);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Opaque text snapshot of the full generator state.
  std::string serialize() const;
  static RngStream deserialize(std::string_view text);

  friend bool operator==(const RngStream& a, const RngStream& b);

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace siva::nn
