#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace acc {

/// Engine-out index and catalyst pass fraction for one pollutant.
struct EmissionSpec {
  std::string species;
  double index = 0.0;  // g emission / g fuel
  double cpf = 1.0;    // tailpipe / engine-out
};

/// Power-demand fuel model parameters. Defaults are uncalibrated placeholders
/// for a mid-size gasoline sedan.
struct IcePowertrain {
  double lambda = 1.0 / 43.5;   // g fuel / kJ
  double k_friction = 0.2;      // kJ / (rev * L)
  double idle_speed = 11.7;     // rev/s
  double engine_slope = 0.9;    // rev/s per m/s
  double displacement = 2.0;    // L
  double eta_engine = 0.4;
  double mass = 1500.0;         // kg
  double c_rr = 0.009;
  double cd_area = 0.704;       // m^2
  double air_density = 1.225;   // kg/m^3
  double eta_driveline = 0.9;
  double accessory_kw = 1.5;
  std::vector<EmissionSpec> emissions = default_emissions();

  static std::vector<EmissionSpec> default_emissions();
  double engine_speed(double v) const;
  void validate() const;
};

/// l_0..l_8 of the speed/acceleration polynomial power model (kW, SI inputs).
struct EvCoefficients {
  std::array<double, 9> l = {0.9, 0.13, 4.3e-4, 1.5, 1e-3, 1e-6, 5e-3, -1e-4, 0.05};
  bool clamp_regen = true;  // integrate max(P, 0)

  void validate() const;
};

double road_load_power(double v, double a, const IcePowertrain& pt);
double cmem_fuel_rate(double v, double a, const IcePowertrain& pt);
double emission_rate(double fuel_rate, const EmissionSpec& spec);
double ev_power(double v, double a, const EvCoefficients& coeffs);

/// One logged tick of a following run. `gap`/`force` are absent for the lead row.
struct TrajectorySample {
  double t = 0.0;
  double v = 0.0;
  double a = 0.0;
  std::optional<double> gap;
  std::optional<double> force;
};

using Trajectory = std::vector<TrajectorySample>;

inline constexpr double kReferenceGap = 55.0;

struct TripMetrics {
  double distance_miles = 0.0;
  std::size_t samples = 0;
  std::optional<double> fuel_g_per_mile;
  std::optional<double> co2_g_per_mile;
  std::optional<double> co_g_per_mile;
  std::optional<double> hc_g_per_mile;
  std::optional<double> nox_g_per_mile;
  std::optional<double> energy_kj_per_mile;
  std::optional<double> gap_rmse;
};

/// Trapezoidal integration of each rate over the trace, normalized per mile.
TripMetrics trip_metrics(const Trajectory& trace, const IcePowertrain& pt,
                         double reference_gap = kReferenceGap);
TripMetrics trip_metrics(const Trajectory& trace, const EvCoefficients& coeffs,
                         double reference_gap = kReferenceGap);

/// Pools several trips as if driven back to back: per-mile values weighted by
/// distance, RMSE pooled over all samples.
TripMetrics aggregate(const std::vector<TripMetrics>& trips);

/// Mean of each column; used for the human row across drivers.
TripMetrics mean_of(const std::vector<TripMetrics>& trips);

/// CSV `t,v,a,gap,force`; empty gap/force fields mean not applicable.
void write_trajectory(std::ostream& out, const Trajectory& trace);
Trajectory read_trajectory(std::istream& in);
Trajectory read_trajectory_file(const std::string& path);
void write_trajectory_file(const std::string& path, const Trajectory& trace);

}  // namespace acc
