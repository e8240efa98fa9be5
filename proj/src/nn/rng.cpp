#include "siva/nn/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace siva::nn {

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double RngStream::uniform() {
  ++draws_;
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void RngStream::fill_normal(std::span<double> out) {
  for (double& v : out) v = normal();
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::below: empty range");
  // rejection keeps the result unbiased
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    ++draws_;
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::string RngStream::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << seed_ << ' ' << draws_ << ' ' << has_spare_ << ' ' << std::hexfloat << spare_
     << std::defaultfloat << ' ' << engine_;
  return os.str();
}

RngStream RngStream::deserialize(std::string_view text) {
  std::istringstream is{std::string(text)};
  RngStream r;
  std::string spare;
  is >> r.seed_ >> r.draws_ >> r.has_spare_ >> spare >> r.engine_;
  if (!is) throw std::invalid_argument("RngStream: malformed state");
  r.spare_ = std::strtod(spare.c_str(), nullptr);
  return r;
}

bool operator==(const RngStream& a, const RngStream& b) {
  return a.seed_ == b.seed_ && a.draws_ == b.draws_ && a.engine_ == b.engine_ &&
         a.has_spare_ == b.has_spare_ && (!a.has_spare_ || a.spare_ == b.spare_);
}

}  // namespace siva::nn
