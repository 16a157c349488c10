#include "acc/control.hpp"

#include <algorithm>
#include <cmath>

namespace acc {

void ConsensusGains::validate() const {
  if (!(beta > 0.0) || !(gamma_gain > 0.0) || !(t_gap > 0.0) || !(d_safe > 0.0)) {
    throw ContractError("consensus gains must all be strictly positive");
  }
}

std::array<double, kNumActions> ActionSpace::forces() {
  std::array<double, kNumActions> out{};
  for (std::size_t i = 0; i < kNumActions; ++i) out[i] = force(i);
  return out;
}

double desired_gap(double v_host, const ConsensusGains& gains) {
  if (!(v_host >= 0.0)) throw ContractError("desired_gap: v_host must be >= 0");
  return std::max(v_host * gains.t_gap, gains.d_safe);
}

double consensus_accel(double gap_actual, double v_host, double v_pre, const ConsensusGains& gains,
                       const ActuatorMap& map) {
  const double a = gains.beta * (gap_actual - desired_gap(std::max(v_host, 0.0), gains)) +
                   gains.gamma_gain * (v_pre - v_host);
  return std::clamp(a, -map.max_decel_magnitude, map.max_accel);
}

std::size_t accel_to_force_index(double a_ref, const ActuatorMap& map) {
  if (!std::isfinite(a_ref)) throw ContractError("accel_to_force_index: non-finite input");
  double f = a_ref >= 0.0 ? a_ref / map.max_accel : a_ref / map.max_decel_magnitude;
  f = std::clamp(f, -1.0, 1.0);
  constexpr double kTie = 1e-12;
  std::size_t best = 0;
  double best_dist = std::abs(f - ActionSpace::force(0));
  for (std::size_t i = 1; i < kNumActions; ++i) {
    const double d = std::abs(f - ActionSpace::force(i));
    if (d < best_dist - kTie ||
        (d <= best_dist + kTie && std::abs(ActionSpace::force(i)) < std::abs(ActionSpace::force(best)))) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

Measurement Measurement::of(const WorldState& w) {
  return {static_cast<float>(w.host.speed), static_cast<float>(w.lead.speed), static_cast<float>(acc::gap(w))};
}

std::size_t ConsensusController::act(const Measurement& m) const {
  const double a = consensus_accel(m.gap, m.host_speed, m.lead_speed, gains_, map_);
  return accel_to_force_index(a, map_);
}

}  // namespace acc
