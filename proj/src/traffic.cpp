#include "gksim/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gksim/errors.hpp"

namespace gksim::traffic {

void PolicyParams::validate() const {
  auto fail = [](const char* msg) { throw DomainError(std::string("PolicyParams: ") + msg); };
  if (!(desired_speed > 0.0)) fail("desired_speed must be > 0");
  if (!(time_headway >= 0.0)) fail("time_headway must be >= 0");
  if (!(min_gap > 0.0)) fail("min_gap must be > 0");
  if (!(max_accel > 0.0)) fail("max_accel must be > 0");
  if (!(comfort_decel > 0.0)) fail("comfort_decel must be > 0");
  if (!(safe_brake_limit > 0.0)) fail("safe_brake_limit must be > 0");
  if (!(accel_exponent >= 1.0)) fail("accel_exponent must be >= 1");
  if (!(politeness >= 0.0 && politeness <= 1.0)) fail("politeness must lie in [0, 1]");
  if (!std::isfinite(lane_change_gain_threshold)) fail("lane_change_gain_threshold not finite");
  if (lane_change_cooldown < 0) fail("lane_change_cooldown must be >= 0");
}

PolicyParams defensive_params() {
  return {.desired_speed = 30.0,
          .time_headway = 2.0,
          .min_gap = 10.0,
          .max_accel = 3.0,
          .comfort_decel = 5.0,
          .accel_exponent = 4.0,
          .politeness = 0.3,
          .lane_change_gain_threshold = 0.4,
          .safe_brake_limit = 4.0,
          .lane_change_cooldown = 5};
}

PolicyParams hotshot_params() {
  return {.desired_speed = 32.0,
          .time_headway = 0.6,
          .min_gap = 4.0,
          .max_accel = 5.0,
          .comfort_decel = 7.0,
          .accel_exponent = 4.0,
          .politeness = 0.05,
          .lane_change_gain_threshold = 0.1,
          .safe_brake_limit = 6.0,
          .lane_change_cooldown = 5};
}

PolicyParams alter_params() {
  return {.desired_speed = 25.0,
          .time_headway = 1.2,
          .min_gap = 6.0,
          .max_accel = 4.0,
          .comfort_decel = 6.0,
          .accel_exponent = 4.0,
          .politeness = 0.1,
          .lane_change_gain_threshold = 0.15,
          .safe_brake_limit = 5.0,
          .lane_change_cooldown = 5};
}

PolicyPreset preset(PresetName name) {
  switch (name) {
    case PresetName::Defensive: return {name, defensive_params()};
    case PresetName::Hotshot: return {name, hotshot_params()};
    case PresetName::Alter: return {name, alter_params()};
  }
  throw DomainError("unknown preset");
}

std::string_view to_string(PresetName name) {
  switch (name) {
    case PresetName::Defensive: return "defensive";
    case PresetName::Hotshot: return "hotshot";
    case PresetName::Alter: return "alter";
  }
  return "unknown";
}

double ring_offset(double from, double to, double ring_length) {
  double d = to - from;
  if (ring_length <= 0.0) return d;
  d = std::fmod(d, ring_length);
  if (d > ring_length / 2.0) d -= ring_length;
  if (d <= -ring_length / 2.0) d += ring_length;
  return d;
}

double idm_desired_gap(double self_speed, double leader_speed, const PolicyParams& p) {
  const double closing = self_speed - leader_speed;
  const double dynamic = self_speed * p.time_headway +
                         self_speed * closing / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
  return p.min_gap + std::max(0.0, dynamic);
}

double idm_acceleration(double self_speed, std::optional<Leader> leader, const PolicyParams& p,
                        double max_brake) {
  double accel = p.max_accel * (1.0 - std::pow(self_speed / p.desired_speed, p.accel_exponent));
  if (leader) {
    if (!(leader->gap > 0.0)) {
      throw DegenerateGeometry("idm_acceleration: gap to leader must be positive");
    }
    const double ratio = idm_desired_gap(self_speed, leader->speed, p) / leader->gap;
    accel -= p.max_accel * ratio * ratio;
  }
  return std::clamp(accel, -max_brake, p.max_accel);
}

namespace {

// Overlapping vehicles are already crashed; the floor keeps hypothetical
// MOBIL evaluations finite instead of throwing.
constexpr double kGapFloor = 1e-3;

double forward_distance(double from, double to, double ring_length) {
  if (ring_length <= 0.0) return to - from;
  double d = std::fmod(to - from, ring_length);
  if (d < 0.0) d += ring_length;
  return d;
}

struct LaneNeighbors {
  const VehicleState* leader = nullptr;
  const VehicleState* follower = nullptr;
  double leader_distance = std::numeric_limits<double>::infinity();    // center to center
  double follower_distance = std::numeric_limits<double>::infinity();  // center to center
  bool overlap = false;
};

LaneNeighbors scan_lane(const VehicleState& subject, int lane,
                        std::span<const VehicleState> vehicles, double ring_length) {
  LaneNeighbors out;
  for (const auto& v : vehicles) {
    if (v.id == subject.id || v.lane != lane) continue;
    const double ahead = forward_distance(subject.position, v.position, ring_length);
    const double behind = forward_distance(v.position, subject.position, ring_length);
    const double contact = 0.5 * (subject.length + v.length);
    if ((ahead >= 0.0 && ahead < contact) || (behind >= 0.0 && behind < contact)) {
      out.overlap = true;
    }
    if (ahead >= 0.0 && ahead < out.leader_distance) {
      out.leader_distance = ahead;
      out.leader = &v;
    }
    if (behind > 0.0 && behind < out.follower_distance) {
      out.follower_distance = behind;
      out.follower = &v;
    }
  }
  return out;
}

double follow_accel(const VehicleState& follower, const VehicleState* leader,
                    double center_distance, double max_brake) {
  if (leader == nullptr || leader->id == follower.id) {
    return idm_acceleration(follower.speed, std::nullopt, follower.active_params, max_brake);
  }
  const double gap = center_distance - 0.5 * (follower.length + leader->length);
  return idm_acceleration(follower.speed, Leader{std::max(gap, kGapFloor), leader->speed},
                          follower.active_params, max_brake);
}

}  // namespace

LaneChangeEvaluation mobil_lane_change(const VehicleState& subject, int candidate_lane,
                                       std::span<const VehicleState> neighbors,
                                       const PolicyParams& params, const RoadContext& road) {
  if (std::abs(candidate_lane - subject.lane) != 1) {
    throw DomainError("mobil_lane_change: candidate lane is not adjacent");
  }
  LaneChangeEvaluation out;
  if (candidate_lane < 0 || candidate_lane >= road.lane_count) return out;

  const double L = road.ring_length;
  const auto current = scan_lane(subject, subject.lane, neighbors, L);
  const auto target = scan_lane(subject, candidate_lane, neighbors, L);

  VehicleState self = subject;
  self.active_params = params;

  // Subject, before and after.
  const double self_before = follow_accel(self, current.leader, current.leader_distance,
                                          road.max_brake);
  const double self_after = follow_accel(self, target.leader, target.leader_distance,
                                         road.max_brake);

  // New follower: follows the new leader now, the subject afterwards.
  double new_follower_gain = 0.0;
  out.new_follower_accel = 0.0;
  bool new_follower_reacts = target.follower != nullptr && !target.follower->crashed;
  if (new_follower_reacts) {
    const auto& nf = *target.follower;
    const double before = (target.leader == nullptr || target.leader->id == nf.id)
                              ? follow_accel(nf, nullptr, 0.0, road.max_brake)
                              : follow_accel(nf, target.leader,
                                             target.follower_distance + target.leader_distance,
                                             road.max_brake);
    const double after = follow_accel(nf, &self, target.follower_distance, road.max_brake);
    out.new_follower_accel = after;
    new_follower_gain = after - before;
  }

  // Old follower: follows the subject now, the old leader afterwards.
  double old_follower_gain = 0.0;
  if (current.follower != nullptr && !current.follower->crashed) {
    const auto& of = *current.follower;
    const double before = follow_accel(of, &self, current.follower_distance, road.max_brake);
    const double after = (current.leader == nullptr || current.leader->id == of.id)
                             ? follow_accel(of, nullptr, 0.0, road.max_brake)
                             : follow_accel(of, current.leader,
                                            current.follower_distance + current.leader_distance,
                                            road.max_brake);
    old_follower_gain = after - before;
  }

  out.blocked = target.overlap;
  out.safe = !target.overlap &&
             (!new_follower_reacts || out.new_follower_accel >= -params.safe_brake_limit);
  out.incentive = (self_after - self_before) +
                  params.politeness * (new_follower_gain + old_follower_gain) -
                  params.lane_change_gain_threshold;
  out.decision = (out.safe && out.incentive > 0.0) ? LaneDecision::Change : LaneDecision::Stay;
  return out;
}

PolicyParams interpolate_params(const PolicyParams& from, const PolicyParams& to,
                                double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw DomainError("interpolate_params: fraction outside [0, 1]");
  }
  auto mix = [fraction](double a, double b) { return std::lerp(a, b, fraction); };
  PolicyParams out;
  out.desired_speed = mix(from.desired_speed, to.desired_speed);
  out.time_headway = mix(from.time_headway, to.time_headway);
  out.min_gap = mix(from.min_gap, to.min_gap);
  out.max_accel = mix(from.max_accel, to.max_accel);
  out.comfort_decel = mix(from.comfort_decel, to.comfort_decel);
  out.accel_exponent = mix(from.accel_exponent, to.accel_exponent);
  out.politeness = mix(from.politeness, to.politeness);
  out.lane_change_gain_threshold =
      mix(from.lane_change_gain_threshold, to.lane_change_gain_threshold);
  out.safe_brake_limit = mix(from.safe_brake_limit, to.safe_brake_limit);
  out.lane_change_cooldown = static_cast<int>(std::lround(
      mix(static_cast<double>(from.lane_change_cooldown),
          static_cast<double>(to.lane_change_cooldown))));
  return out;
}

}  // namespace gksim::traffic
