#include "gksim/reward.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gksim/errors.hpp"

namespace gksim::reward {

void RewardConfig::validate() const {
  auto fail = [](const char* msg) { throw DomainError(std::string("RewardConfig: ") + msg); };
  if (!(alpha > 0.0)) fail("alpha must be > 0");
  if (!(sigma > 0.0)) fail("sigma must be > 0");
  if (!(target_speed >= 0.0)) fail("target_speed must be >= 0");
  if (!(kappa >= 0.0)) fail("kappa must be >= 0");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(zeta >= 0.0)) fail("zeta must be >= 0");
  if (!(rd_max > 0.0)) fail("rd_max must be > 0");
  if (!(neighbor_radius >= 0.0)) fail("neighbor_radius must be >= 0");
  if (!(distance_floor >= 0.0)) fail("distance_floor must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (!(weight_speed >= 0.0 && weight_defensive >= 0.0 && weight_collision >= 0.0)) {
    fail("loss weights must be >= 0");
  }
}

double speed_reward(double speed, const RewardConfig& c) {
  const double d = speed - c.target_speed;
  return c.alpha * std::exp(-d * d / (2.0 * c.sigma * c.sigma));
}

double collision_reward(bool crashed, const RewardConfig& c) { return crashed ? -c.kappa : 0.0; }

double defensive_reward(const traffic::VehicleState& subject,
                        std::span<const traffic::VehicleState> neighbors, const RewardConfig& c,
                        std::optional<double> ring_length) {
  const double L = ring_length.value_or(0.0);
  double penalty = 0.0;
  for (const auto& n : neighbors) {
    if (n.id == subject.id) continue;
    // Positive when the neighbor is ahead of the subject.
    const double offset = traffic::ring_offset(subject.position, n.position, L);
    const double distance = std::max(std::abs(offset), c.distance_floor);
    if (std::abs(offset) > c.neighbor_radius) continue;
    if (distance == 0.0) {
      throw DegenerateGeometry("defensive_reward: neighbor at zero distance");
    }
    // H(0) = 0 on both branches.
    double closing = 0.0;
    if (offset > 0.0) {
      closing = std::max(0.0, subject.speed - n.speed);
    } else if (offset < 0.0) {
      closing = std::max(0.0, n.speed - subject.speed);
    }
    const int lane_diff = std::abs(n.lane - subject.lane);
    penalty += (closing * closing + c.zeta) / (std::ldexp(1.0, lane_diff) * distance);
  }
  return std::clamp(c.rd_max - c.lambda * penalty, 0.0, c.rd_max);
}

double step_loss(double r_speed, double r_defensive, double r_collision, const RewardConfig& c) {
  const double speed_hat = r_speed / c.alpha;
  const double defensive_hat = r_defensive / c.rd_max;
  const double collision_hat = c.kappa > 0.0 ? r_collision / c.kappa : 0.0;
  return -(c.weight_speed * speed_hat + c.weight_defensive * defensive_hat +
           c.weight_collision * collision_hat);
}

RewardBreakdown score(const traffic::VehicleState& subject,
                      std::span<const traffic::VehicleState> neighbors, const RewardConfig& c,
                      std::optional<double> ring_length) {
  RewardBreakdown out;
  out.r_speed = speed_reward(subject.speed, c);
  out.r_collision = collision_reward(subject.crashed, c);
  out.r_defensive = defensive_reward(subject, neighbors, c, ring_length);
  out.loss = step_loss(out.r_speed, out.r_defensive, out.r_collision, c);
  return out;
}

}  // namespace gksim::reward
