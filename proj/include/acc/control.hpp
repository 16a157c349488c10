#pragma once

#include <array>
#include <cstddef>

#include "acc/sim.hpp"

namespace acc {

/// Gains of the consensus car-following law
///   a_ref = beta * (gap - d_ref) + gamma * (v_pre - v_host),
///   d_ref = max(v_host * t_gap, d_safe).
struct ConsensusGains {
  double beta = 0.15;        // 1/s^2
  double gamma_gain = 0.9;   // 1/s
  double t_gap = 55.0 / 30.0;  // s
  double d_safe = 10.0;      // m

  void validate() const;
};

inline constexpr std::size_t kNumActions = 21;

/// The 21 normalized forces -1.0, -0.9, ..., 1.0 shared by every controller.
struct ActionSpace {
  static constexpr double force(std::size_t index) { return (double(index) - 10.0) / 10.0; }
  static constexpr std::size_t size() { return kNumActions; }
  static constexpr std::size_t zero_index() { return 10; }
  static std::array<double, kNumActions> forces();
};

double desired_gap(double v_host, const ConsensusGains& gains);

/// Clamped to the actuator envelope.
double consensus_accel(double gap_actual, double v_host, double v_pre, const ConsensusGains& gains,
                       const ActuatorMap& map);

/// Nearest action whose force realizes `a_ref`; ties go to the smaller |force|.
std::size_t accel_to_force_index(double a_ref, const ActuatorMap& map);

/// What a controller gets to see each tick. Single precision because this is
/// exactly what crosses the wire to an external agent.
struct Measurement {
  float host_speed = 0.0f;
  float lead_speed = 0.0f;
  float gap = 0.0f;

  static Measurement of(const WorldState& w);
};

/// Consensus law quantized through the shared action space.
class ConsensusController {
 public:
  ConsensusController(ConsensusGains gains, ActuatorMap map) : gains_(gains), map_(map) {}

  std::size_t act(const Measurement& m) const;
  const ConsensusGains& gains() const { return gains_; }

 private:
  ConsensusGains gains_;
  ActuatorMap map_;
};

}  // namespace acc
