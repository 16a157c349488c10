#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "acc/common.hpp"

namespace acc {

inline constexpr std::size_t kSinusoidTerms = 10;

/// Lead-speed generator: base + scale * sum_i sign_i * sin(multiplier * omega_i * t).
struct SinusoidSpec {
  std::array<int, kSinusoidTerms> signs{};
  std::array<double, kSinusoidTerms> omegas{};
  double base_speed = 30.0;
  double amplitude_scale = 0.3;
  double angular_multiplier = 2.0;

  void validate() const;
  bool operator==(const SinusoidSpec&) const = default;
};

enum class TraceSource { Generated, Ingested, Recorded };

struct SpeedTrace {
  double dt = 0.02;
  std::vector<double> samples;
  TraceSource source = TraceSource::Generated;

  double duration() const { return samples.empty() ? 0.0 : dt * double(samples.size() - 1); }
  /// Speed at tick k; holds the last sample past the end.
  double at(std::size_t k) const { return samples[k < samples.size() ? k : samples.size() - 1]; }
  void validate() const;
  bool operator==(const SpeedTrace&) const = default;
};

struct TraceLimits {
  Interval speed;
  Interval accel;

  static TraceLimits ice() { return {{27.0, 33.0}, {-3.5, 3.5}}; }
  static TraceLimits ev() { return {{0.0, 30.0}, {-5.5, 3.5}}; }
};

struct TraceViolation {
  enum class Kind { Speed, Accel };
  Kind kind;
  std::size_t index;  // sample index (for Accel: the later sample of the pair)
  double value;
};

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

SinusoidSpec sample_spec(Rng& rng);

double eval_speed(const SinusoidSpec& spec, double t);

/// Streaming rate limiter: each output moves toward the raw input by at most
/// the accel bounds times dt.
class RateLimiter {
 public:
  RateLimiter(Interval accel, double dt) : accel_(accel), dt_(dt) {}
  double operator()(double raw);
  void reset() { primed_ = false; }

 private:
  Interval accel_;
  double dt_;
  double last_ = 0.0;
  bool primed_ = false;
};

/// Samples `spec` on [0, duration] at `dt`, rate-limited to `accel_limits`.
SpeedTrace generate_trace(const SinusoidSpec& spec, double duration, double dt,
                          const Interval& accel_limits);

/// Reads a `t,v` CSV and resamples it linearly onto a uniform grid of step dt.
SpeedTrace load_trace(std::istream& in, double target_dt);
SpeedTrace load_trace_file(const std::string& path, double target_dt);

/// Writes a `t,v` CSV.
void write_trace(std::ostream& out, const SpeedTrace& trace);

std::vector<TraceViolation> validate_trace(const SpeedTrace& trace, const TraceLimits& limits);

inline constexpr double kTestTraceSeconds = 240.0;
inline constexpr std::uint64_t kDefaultTestSetSeed = 20190801;

/// The four fixed evaluation specs / traces derived from `seed`.
std::vector<SinusoidSpec> make_test_specs(std::uint64_t seed);
std::vector<SpeedTrace> make_test_set(std::uint64_t seed, double dt = 0.02);

}  // namespace acc
