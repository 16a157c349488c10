#pragma once

#include <cstdint>

#include "acc/common.hpp"

namespace acc {

struct VehicleKinematics {
  double position = 0.0;  // m, longitudinal station
  double speed = 0.0;     // m/s
  double accel = 0.0;     // m/s^2

  bool operator==(const VehicleKinematics&) const = default;
};

/// Bounds of the normalized force -> acceleration map.
struct ActuatorMap {
  double max_accel = 3.5;
  double max_decel_magnitude = 5.5;

  void validate() const;
};

struct EpisodeSpec {
  double dt = 0.02;
  double max_gap = 300.0;
  std::uint64_t max_steps = 12000;
  PowertrainMode mode = PowertrainMode::Ice;
  Interval lead_v0{27.0, 33.0};
  Interval host_v0{25.0, 30.0};
  Interval gap0{25.0, 35.0};
  double vehicle_length = 5.0;

  static EpisodeSpec ice();
  static EpisodeSpec ev();

  void validate() const;
};

struct WorldState {
  double sim_time = 0.0;
  std::uint64_t step_index = 0;
  VehicleKinematics lead;
  VehicleKinematics host;
  double vehicle_length = 5.0;

  bool operator==(const WorldState&) const = default;
};

enum class TerminationStatus { Running, Collision, GapExceeded, TimeLimit };

const char* to_string(TerminationStatus s);

/// Piecewise-linear map from normalized force in [-1, 1] to m/s^2.
double force_to_accel(double force, const ActuatorMap& map);

/// Bumper-to-bumper distance between lead and host.
double gap(const WorldState& world);

/// One semi-implicit Euler tick. The lead is kinematic: it takes
/// `lead_speed_next` exactly. Host speed is clamped at zero.
WorldState step(const WorldState& world, double host_accel, double lead_speed_next,
                const EpisodeSpec& spec);

/// Collision beats GapExceeded beats TimeLimit.
TerminationStatus check_termination(const WorldState& world, const EpisodeSpec& spec);

/// Fresh episode with lead/host speeds and initial gap drawn uniformly from
/// the spec ranges; host starts at station 0.
WorldState reset(const EpisodeSpec& spec, Rng& rng);

}  // namespace acc
