#pragma once

// Stakeholder rewards (speed, collision, defensive driving) and the scalar
// per-step loss that feeds the preference prior and risk estimates.

#include <optional>
#include <span>

#include "gksim/traffic.hpp"

namespace gksim::reward {

struct RewardConfig {
  double alpha = 1.0;            // speed reward peak
  double sigma = 2.0;            // speed reward width, m/s
  double target_speed = 30.0;    // v_T, m/s
  double kappa = 5.0;            // collision penalty magnitude
  double lambda = 0.1;           // defensive penalty scale
  double zeta = 1.0;             // proximity constant
  double rd_max = 1.0;           // R_D,max
  double neighbor_radius = 60.0; // m
  double gamma = 0.95;           // risk discount
  double weight_speed = 1.0;
  double weight_defensive = 1.0;
  double weight_collision = 1.0;
  // Along-track distances below this are raised to it before scoring. Zero
  // keeps the strict contract (a zero distance is an error).
  double distance_floor = 0.0;  // m

  void validate() const;
};

struct RewardBreakdown {
  double r_speed = 0.0;
  double r_collision = 0.0;
  double r_defensive = 0.0;
  double loss = 0.0;
};

[[nodiscard]] double speed_reward(double speed, const RewardConfig& config);
[[nodiscard]] double collision_reward(bool crashed, const RewardConfig& config);

/// Defensive-driving reward for `subject`, in [0, rd_max].
///
/// Neighbors farther than neighbor_radius (along-track, ring-wrapped when
/// ring_length is given) are ignored; the subject itself is skipped. Speeds
/// enter as plain numbers in m/s. Distances are floored at distance_floor; a
/// neighbor at zero distance with no floor raises DegenerateGeometry.
[[nodiscard]] double defensive_reward(const traffic::VehicleState& subject,
                                      std::span<const traffic::VehicleState> neighbors,
                                      const RewardConfig& config,
                                      std::optional<double> ring_length = std::nullopt);

/// -(w_S r_S/alpha + w_D r_D/rd_max + w_C r_C/kappa). Bounded in [-2, 1] at unit weights.
[[nodiscard]] double step_loss(double r_speed, double r_defensive, double r_collision,
                               const RewardConfig& config);

/// All components plus the loss for one vehicle at one step.
[[nodiscard]] RewardBreakdown score(const traffic::VehicleState& subject,
                                    std::span<const traffic::VehicleState> neighbors,
                                    const RewardConfig& config,
                                    std::optional<double> ring_length = std::nullopt);

}  // namespace gksim::reward
