#include "acc/energy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string_view>

#include "acc/common.hpp"

namespace acc {

std::vector<EmissionSpec> IcePowertrain::default_emissions() {
  return {{"CO2", 3.09, 1.0}, {"CO", 0.45, 0.08}, {"HC", 0.03, 0.1}, {"NOx", 0.025, 0.15}};
}

double IcePowertrain::engine_speed(double v) const { return std::max(idle_speed, engine_slope * v); }

void IcePowertrain::validate() const {
  const double positives[] = {lambda, k_friction, idle_speed, engine_slope, displacement, mass,
                              c_rr,   cd_area,    air_density, eta_driveline, accessory_kw};
  for (double p : positives) {
    if (!(p > 0.0)) throw ContractError("powertrain parameters must be strictly positive");
  }
  if (!(eta_engine > 0.0 && eta_engine <= 1.0)) throw ContractError("powertrain.eta_engine must be in (0, 1]");
  for (const auto& e : emissions) {
    if (!(e.index >= 0.0)) throw ContractError("emission index must be >= 0 for " + e.species);
    if (!(e.cpf >= 0.0 && e.cpf <= 1.0)) throw ContractError("emission CPF must be in [0, 1] for " + e.species);
  }
}

void EvCoefficients::validate() const {
  for (double c : l) {
    if (!std::isfinite(c)) throw ContractError("EV coefficients must be finite");
  }
}

double road_load_power(double v, double a, const IcePowertrain& pt) {
  if (!(v >= 0.0)) throw ContractError("road_load_power: v must be >= 0");
  const double force = pt.mass * a + pt.mass * kGravity * pt.c_rr + 0.5 * pt.air_density * pt.cd_area * v * v;
  const double tractive_kw = force * v / 1000.0;
  return std::max(tractive_kw, 0.0) / pt.eta_driveline + pt.accessory_kw;
}

double cmem_fuel_rate(double v, double a, const IcePowertrain& pt) {
  const double p_engine = road_load_power(v, a, pt);
  return pt.lambda * (pt.k_friction * pt.engine_speed(v) * pt.displacement + p_engine / pt.eta_engine);
}

double emission_rate(double fuel_rate, const EmissionSpec& spec) {
  if (!(fuel_rate >= 0.0)) throw ContractError("emission_rate: fuel rate must be >= 0");
  return fuel_rate * spec.index * spec.cpf;
}

double ev_power(double v, double a, const EvCoefficients& c) {
  if (!(v >= 0.0)) throw ContractError("ev_power: v must be >= 0");
  const auto& l = c.l;
  const double v2 = v * v, v3 = v2 * v, v4 = v3 * v;
  return l[0] + l[1] * v + l[2] * v3 + l[3] * v * a + l[4] * v2 + l[5] * v4 + l[6] * v2 * a +
         l[7] * v3 * a + l[8] * v * a * a;
}

namespace {

void check_trace(const Trajectory& trace) {
  if (trace.size() < 2) throw std::invalid_argument("trip_metrics: need at least 2 samples");
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (!(trace[i].t > trace[i - 1].t)) throw std::invalid_argument("trip_metrics: time not increasing");
  }
}

// Trapezoidal integral of rate(sample) over the trace.
template <class Rate>
double integrate(const Trajectory& trace, Rate&& rate) {
  double total = 0.0;
  double prev = rate(trace.front());
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double cur = rate(trace[i]);
    total += 0.5 * (prev + cur) * (trace[i].t - trace[i - 1].t);
    prev = cur;
  }
  return total;
}

TripMetrics common_metrics(const Trajectory& trace, double reference_gap) {
  check_trace(trace);
  TripMetrics m;
  m.samples = trace.size();
  const double meters = integrate(trace, [](const TrajectorySample& s) { return s.v; });
  if (!(meters > 0.0)) throw std::invalid_argument("trip_metrics: trip distance must be positive");
  m.distance_miles = meters / kMetersPerMile;

  std::size_t n = 0;
  double sq = 0.0;
  for (const auto& s : trace) {
    if (s.gap) {
      const double e = *s.gap - reference_gap;
      sq += e * e;
      ++n;
    }
  }
  if (n > 0) m.gap_rmse = std::sqrt(sq / double(n));
  return m;
}

std::optional<double>* species_slot(TripMetrics& m, const std::string& species) {
  if (species == "CO2") return &m.co2_g_per_mile;
  if (species == "CO") return &m.co_g_per_mile;
  if (species == "HC") return &m.hc_g_per_mile;
  if (species == "NOx") return &m.nox_g_per_mile;
  return nullptr;
}

}  // namespace

TripMetrics trip_metrics(const Trajectory& trace, const IcePowertrain& pt, double reference_gap) {
  TripMetrics m = common_metrics(trace, reference_gap);
  const double fuel = integrate(trace, [&](const TrajectorySample& s) { return cmem_fuel_rate(s.v, s.a, pt); });
  m.fuel_g_per_mile = fuel / m.distance_miles;
  for (const auto& e : pt.emissions) {
    if (auto* slot = species_slot(m, e.species)) {
      // Emission is linear in fuel rate, so the integral factors.
      *slot = emission_rate(fuel, e) / m.distance_miles;
    }
  }
  return m;
}

TripMetrics trip_metrics(const Trajectory& trace, const EvCoefficients& coeffs, double reference_gap) {
  TripMetrics m = common_metrics(trace, reference_gap);
  const double kj = integrate(trace, [&](const TrajectorySample& s) {
    const double p = ev_power(s.v, s.a, coeffs);
    return coeffs.clamp_regen ? std::max(p, 0.0) : p;
  });
  m.energy_kj_per_mile = kj / m.distance_miles;
  return m;
}

namespace {

template <class Fn>
void for_each_rate(TripMetrics& m, Fn&& fn) {
  fn(&TripMetrics::fuel_g_per_mile, m);
  fn(&TripMetrics::co2_g_per_mile, m);
  fn(&TripMetrics::co_g_per_mile, m);
  fn(&TripMetrics::hc_g_per_mile, m);
  fn(&TripMetrics::nox_g_per_mile, m);
  fn(&TripMetrics::energy_kj_per_mile, m);
}

}  // namespace

TripMetrics aggregate(const std::vector<TripMetrics>& trips) {
  if (trips.empty()) throw std::invalid_argument("aggregate: no trips");
  TripMetrics out;
  double sq = 0.0;
  std::size_t gap_samples = 0;
  for (const auto& t : trips) {
    out.distance_miles += t.distance_miles;
    out.samples += t.samples;
    if (t.gap_rmse) {
      sq += *t.gap_rmse * *t.gap_rmse * double(t.samples);
      gap_samples += t.samples;
    }
  }
  for_each_rate(out, [&](auto member, TripMetrics& o) {
    double total = 0.0;
    for (const auto& t : trips) {
      if (!(t.*member)) return;
      total += *(t.*member) * t.distance_miles;
    }
    o.*member = total / o.distance_miles;
  });
  if (gap_samples > 0) out.gap_rmse = std::sqrt(sq / double(gap_samples));
  return out;
}

TripMetrics mean_of(const std::vector<TripMetrics>& trips) {
  if (trips.empty()) throw std::invalid_argument("mean_of: no trips");
  TripMetrics out;
  const double n = double(trips.size());
  for (const auto& t : trips) {
    out.distance_miles += t.distance_miles / n;
    out.samples += t.samples;
  }
  auto mean_member = [&](auto member, TripMetrics& o) {
    double total = 0.0;
    for (const auto& t : trips) {
      if (!(t.*member)) return;
      total += *(t.*member);
    }
    o.*member = total / n;
  };
  for_each_rate(out, mean_member);
  mean_member(&TripMetrics::gap_rmse, out);
  return out;
}

void write_trajectory(std::ostream& out, const Trajectory& trace) {
  out << "t,v,a,gap,force\n";
  char buf[160];
  auto opt = [](const std::optional<double>& x, char* dst, std::size_t n) {
    if (x) std::snprintf(dst, n, "%.17g", *x);
    else dst[0] = '\0';
  };
  for (const auto& s : trace) {
    char g[40], f[40];
    opt(s.gap, g, sizeof g);
    opt(s.force, f, sizeof f);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%s\n", s.t, s.v, s.a, g, f);
    out << buf;
  }
}

namespace {

std::optional<double> parse_field(std::string_view f, std::size_t line, bool optional) {
  while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.remove_suffix(1);
  while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
  if (f.empty()) {
    if (optional) return std::nullopt;
    throw std::runtime_error("trajectory line " + std::to_string(line) + ": missing required field");
  }
  double x = 0.0;
  auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
  if (ec != std::errc{} || p != f.data() + f.size() || !std::isfinite(x)) {
    throw std::runtime_error("trajectory line " + std::to_string(line) + ": unparsable field '" +
                             std::string(f) + "'");
  }
  return x;
}

}  // namespace

Trajectory read_trajectory(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trajectory: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,v,a,gap,force") throw std::runtime_error("trajectory: expected header 't,v,a,gap,force'");
  Trajectory out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (auto c = rest.find(','); ; c = rest.find(',')) {
      fields.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
    if (fields.size() != 5) throw std::runtime_error("trajectory line " + std::to_string(lineno) + ": expected 5 fields");
    TrajectorySample s;
    s.t = *parse_field(fields[0], lineno, false);
    s.v = *parse_field(fields[1], lineno, false);
    s.a = *parse_field(fields[2], lineno, false);
    s.gap = parse_field(fields[3], lineno, true);
    s.force = parse_field(fields[4], lineno, true);
    if (s.v < 0.0) throw std::runtime_error("trajectory line " + std::to_string(lineno) + ": negative speed");
    if (!out.empty() && !(s.t > out.back().t)) {
      throw std::runtime_error("trajectory line " + std::to_string(lineno) + ": time not increasing");
    }
    out.push_back(s);
  }
  return out;
}

Trajectory read_trajectory_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  return read_trajectory(in);
}

void write_trajectory_file(const std::string& path, const Trajectory& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
  write_trajectory(out, trace);
}

}  // namespace acc
