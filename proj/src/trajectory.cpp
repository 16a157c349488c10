#include "acc/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace acc {

void SinusoidSpec::validate() const {
  for (std::size_t i = 0; i < kSinusoidTerms; ++i) {
    if (signs[i] != 1 && signs[i] != -1) throw ContractError("sinusoid sign must be +1 or -1");
    if (!(omegas[i] > 0.0 && omegas[i] < 1.0)) throw ContractError("sinusoid omega must be in (0, 1)");
  }
}

void SpeedTrace::validate() const {
  if (samples.size() < 2) throw ContractError("speed trace needs at least 2 samples");
  if (!(dt > 0.0)) throw ContractError("speed trace dt must be > 0");
  for (double v : samples) {
    if (!std::isfinite(v) || v < 0.0) throw ContractError("speed trace sample must be finite and >= 0");
  }
}

SinusoidSpec sample_spec(Rng& rng) {
  SinusoidSpec spec;
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < kSinusoidTerms; ++i) {
    spec.signs[i] = coin(rng) ? 1 : -1;
    double w = 0.0;
    while (!(w > 0.0)) w = unit(rng);  // open interval: reject an exact 0
    spec.omegas[i] = w;
  }
  return spec;
}

double eval_speed(const SinusoidSpec& spec, double t) {
  if (!(t >= 0.0)) throw ContractError("eval_speed: t must be >= 0");
  double sum = 0.0;
  for (std::size_t i = 0; i < kSinusoidTerms; ++i) {
    sum += spec.signs[i] * std::sin(spec.angular_multiplier * spec.omegas[i] * t);
  }
  return spec.base_speed + spec.amplitude_scale * sum;
}

double RateLimiter::operator()(double raw) {
  if (!primed_) {
    primed_ = true;
    last_ = raw;
    return raw;
  }
  const double lo = last_ + accel_.lo * dt_;
  const double hi = last_ + accel_.hi * dt_;
  last_ = raw < lo ? lo : (raw > hi ? hi : raw);
  return last_;
}

SpeedTrace generate_trace(const SinusoidSpec& spec, double duration, double dt,
                          const Interval& accel_limits) {
  if (!(dt > 0.0) || !(duration > 0.0)) throw ContractError("generate_trace: bad duration/dt");
  const auto n = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
  SpeedTrace trace;
  trace.dt = dt;
  trace.source = TraceSource::Generated;
  trace.samples.reserve(n);
  RateLimiter limit(accel_limits, dt);
  for (std::size_t k = 0; k < n; ++k) {
    trace.samples.push_back(limit(eval_speed(spec, double(k) * dt)));
  }
  return trace;
}

namespace {

double parse_double(std::string_view field, std::size_t line, const char* name) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw TraceParseError(line, std::string("unparsable ") + name + " field '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

SpeedTrace load_trace(std::istream& in, double target_dt) {
  if (!(target_dt > 0.0)) throw ContractError("load_trace: target dt must be > 0");
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw TraceParseError(1, "missing header");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,v") throw TraceParseError(lineno, "expected header 't,v', got '" + line + "'");

  std::vector<double> ts, vs;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw TraceParseError(lineno, "expected exactly two fields");
    }
    const double t = parse_double(std::string_view(line).substr(0, comma), lineno, "t");
    const double v = parse_double(std::string_view(line).substr(comma + 1), lineno, "v");
    if (v < 0.0) throw TraceParseError(lineno, "negative speed");
    if (!ts.empty() && !(t > ts.back())) throw TraceParseError(lineno, "time is not strictly increasing");
    ts.push_back(t);
    vs.push_back(v);
  }
  if (ts.size() < 2) throw TraceParseError(lineno, "need at least 2 data rows");

  SpeedTrace trace;
  trace.dt = target_dt;
  trace.source = TraceSource::Ingested;
  const double span = ts.back() - ts.front();
  // Tolerate grid points that land a hair past the last timestamp.
  const auto n = static_cast<std::size_t>(std::floor(span / target_dt + 1e-9)) + 1;
  trace.samples.reserve(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = std::min(ts.front() + double(k) * target_dt, ts.back());
    while (seg + 2 < ts.size() && t > ts[seg + 1]) ++seg;
    const double t0 = ts[seg], t1 = ts[seg + 1];
    const double frac = (t - t0) / (t1 - t0);
    trace.samples.push_back((1.0 - frac) * vs[seg] + frac * vs[seg + 1]);
  }
  return trace;
}

SpeedTrace load_trace_file(const std::string& path, double target_dt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  return load_trace(in, target_dt);
}

void write_trace(std::ostream& out, const SpeedTrace& trace) {
  out << "t,v\n";
  char buf[64];
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", double(k) * trace.dt, trace.samples[k]);
    out << buf;
  }
}

namespace {
constexpr double kAccelRoundoff = 1e-9;
}  // namespace

std::vector<TraceViolation> validate_trace(const SpeedTrace& trace, const TraceLimits& limits) {
  std::vector<TraceViolation> out;
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    if (!limits.speed.contains(trace.samples[k])) {
      out.push_back({TraceViolation::Kind::Speed, k, trace.samples[k]});
    }
    if (k > 0) {
      const double a = (trace.samples[k] - trace.samples[k - 1]) / trace.dt;
      // Slack for finite-difference roundoff on rate-limited samples.
      const Interval slack{limits.accel.lo - kAccelRoundoff, limits.accel.hi + kAccelRoundoff};
      if (!slack.contains(a)) out.push_back({TraceViolation::Kind::Accel, k, a});
    }
  }
  return out;
}

std::vector<SinusoidSpec> make_test_specs(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SinusoidSpec> specs;
  while (specs.size() < 4) {
    auto s = sample_spec(rng);
    bool dup = false;
    for (const auto& p : specs) dup = dup || p == s;
    if (!dup) specs.push_back(s);
  }
  return specs;
}

std::vector<SpeedTrace> make_test_set(std::uint64_t seed, double dt) {
  std::vector<SpeedTrace> set;
  for (const auto& spec : make_test_specs(seed)) {
    set.push_back(generate_trace(spec, kTestTraceSeconds, dt, TraceLimits::ice().accel));
  }
  return set;
}

}  // namespace acc
