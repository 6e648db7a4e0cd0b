#pragma once

/**
 * Driver behavior: IDM car following, MOBIL lane changes and the policy
 * presets (Defensive, Hotshot, Alter).
 *
 * Positions are along-track coordinates on a closed ring; every function that
 * needs relative positions takes the ring length and wraps offsets into
 * (-L/2, L/2].
 */

#include <optional>
#include <span>
#include <string_view>

namespace gksim::traffic {

/// Hard braking limit applied to every IDM output, and to crashed vehicles.
inline constexpr double kDefaultMaxBrake = 9.0;

struct PolicyParams {
  double desired_speed = 30.0;               // v0, m/s
  double time_headway = 1.5;                 // T, s
  double min_gap = 2.0;                      // s0, m
  double max_accel = 3.0;                    // a, m/s^2
  double comfort_decel = 5.0;                // b, m/s^2
  double accel_exponent = 4.0;               // delta
  double politeness = 0.0;                   // p, [0, 1]
  double lane_change_gain_threshold = 0.2;   // m/s^2
  double safe_brake_limit = 4.0;             // b_safe, m/s^2
  int lane_change_cooldown = 5;              // world steps

  /// Throws DomainError when an invariant is violated.
  void validate() const;
  bool operator==(const PolicyParams&) const = default;
};

enum class PresetName { Defensive, Hotshot, Alter };

struct PolicyPreset {
  PresetName name;
  PolicyParams params;
};

[[nodiscard]] PolicyParams defensive_params();
[[nodiscard]] PolicyParams hotshot_params();
[[nodiscard]] PolicyParams alter_params();
[[nodiscard]] PolicyPreset preset(PresetName name);
[[nodiscard]] std::string_view to_string(PresetName name);

enum class Role { Ego, Alter };

struct VehicleState {
  int id = 0;
  Role role = Role::Alter;
  int lane = 0;
  double position = 0.0;  // m, along-track, in [0, ring_length)
  double speed = 0.0;     // m/s
  double length = 5.0;    // m
  bool crashed = false;
  PolicyParams active_params{};
  int lane_change_cooldown_remaining = 0;
};

/// Shortest signed along-track displacement from `from` to `to` on a ring.
/// A non-positive ring length means an open road (plain difference).
[[nodiscard]] double ring_offset(double from, double to, double ring_length);

struct Leader {
  double gap;    // bumper-to-bumper, m
  double speed;  // m/s
};

/// IDM acceleration, clamped to [-max_brake, a]. Throws DegenerateGeometry for gap <= 0.
[[nodiscard]] double idm_acceleration(double self_speed, std::optional<Leader> leader,
                                      const PolicyParams& params,
                                      double max_brake = kDefaultMaxBrake);

/// IDM desired dynamic gap s*.
[[nodiscard]] double idm_desired_gap(double self_speed, double leader_speed,
                                     const PolicyParams& params);

struct RoadContext {
  int lane_count = 4;
  double ring_length = 1000.0;
  double max_brake = kDefaultMaxBrake;
};

enum class LaneDecision { Stay, Change };

struct LaneChangeEvaluation {
  LaneDecision decision = LaneDecision::Stay;
  bool safe = false;                 // safety criterion alone (incl. overlap veto)
  bool blocked = true;               // off-road or target slot physically occupied
  double incentive = 0.0;            // self gain + politeness * follower gains - threshold
  double new_follower_accel = 0.0;   // IDM accel imposed on the new follower
};

/**
 * MOBIL evaluation of moving `subject` to `candidate_lane`.
 *
 * `neighbors` are all other vehicles on the road (the subject itself is
 * skipped if present). Crashed vehicles act as leaders but never as reacting
 * followers. Any vehicle whose s-interval overlaps the subject's in the target
 * lane vetoes the change. Throws DomainError for a non-adjacent lane.
 */
[[nodiscard]] LaneChangeEvaluation mobil_lane_change(const VehicleState& subject,
                                                     int candidate_lane,
                                                     std::span<const VehicleState> neighbors,
                                                     const PolicyParams& params,
                                                     const RoadContext& road);

/// Field-wise linear interpolation; exact at both endpoints.
[[nodiscard]] PolicyParams interpolate_params(const PolicyParams& from, const PolicyParams& to,
                                              double fraction);

}  // namespace gksim::traffic
