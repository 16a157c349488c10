#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace acc {

/// Seeded generator used everywhere randomness is needed. Same binary + same
/// seed gives the same stream.
using Rng = std::mt19937_64;

/// Thrown when a caller violates an operation's precondition.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
  double width() const { return hi - lo; }
  bool valid() const { return lo <= hi; }
};

inline double draw_uniform(Rng& rng, const Interval& iv) {
  if (iv.lo == iv.hi) return iv.lo;
  std::uniform_real_distribution<double> dist(iv.lo, iv.hi);
  return dist(rng);
}

enum class PowertrainMode { Ice, Ev };

inline const char* to_string(PowertrainMode m) { return m == PowertrainMode::Ice ? "ice" : "ev"; }

inline constexpr double kMetersPerMile = 1609.344;
inline constexpr double kGravity = 9.81;

}  // namespace acc
