#include "gksim/world.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gksim/errors.hpp"

namespace gksim::world {

using traffic::VehicleState;

namespace {

constexpr double kGapFloor = 1e-3;

double wrap_position(double s, double ring_length) {
  s = std::fmod(s, ring_length);
  if (s < 0.0) s += ring_length;
  return s;
}

double forward_distance(double from, double to, double ring_length) {
  return wrap_position(to - from, ring_length);
}

// leader[i] = index of the vehicle directly ahead of i in its lane, or -1.
std::vector<int> find_leaders(const WorldState& w) {
  const int n = static_cast<int>(w.vehicles.size());
  std::vector<std::vector<int>> lanes(static_cast<std::size_t>(w.config.geometry.lane_count));
  for (int i = 0; i < n; ++i) lanes[w.vehicles[i].lane].push_back(i);
  std::vector<int> leader(n, -1);
  for (auto& lane : lanes) {
    if (lane.size() < 2) continue;
    std::sort(lane.begin(), lane.end(), [&](int a, int b) {
      const double pa = w.vehicles[a].position;
      const double pb = w.vehicles[b].position;
      return pa < pb || (pa == pb && a < b);
    });
    for (std::size_t k = 0; k < lane.size(); ++k) {
      leader[lane[k]] = lane[(k + 1) % lane.size()];
    }
  }
  return leader;
}

struct Intention {
  int target_lane = -1;
};

Intention choose_lane(const WorldState& w, const VehicleState& v, const traffic::RoadContext& road,
                      bool flip) {
  std::optional<traffic::LaneChangeEvaluation> best_change;
  int best_change_lane = -1;
  std::optional<traffic::LaneChangeEvaluation> best_open;
  int best_open_lane = -1;
  for (int candidate : {v.lane - 1, v.lane + 1}) {
    if (candidate < 0 || candidate >= road.lane_count) continue;
    const auto eval =
        traffic::mobil_lane_change(v, candidate, w.vehicles, v.active_params, road);
    if (eval.decision == traffic::LaneDecision::Change &&
        (!best_change || eval.incentive > best_change->incentive)) {
      best_change = eval;
      best_change_lane = candidate;
    }
    if (!eval.blocked && (!best_open || eval.incentive > best_open->incentive)) {
      best_open = eval;
      best_open_lane = candidate;
    }
  }
  if (!flip) return {best_change_lane};
  // A flipped decision: a planned change is abandoned, a planned stay becomes a
  // change into the best unoccupied adjacent slot, ignoring b_safe.
  if (best_change) return {-1};
  return {best_open_lane};
}

}  // namespace

void WorldConfig::validate() const {
  auto fail = [](const std::string& msg) { throw DomainError("WorldConfig: " + msg); };
  if (geometry.lane_count < 2) fail("lane_count must be >= 2");
  if (!(geometry.lane_width > 0.0)) fail("lane_width must be > 0");
  if (!(vehicle_length > 0.0)) fail("vehicle_length must be > 0");
  if (n_ego < 0 || n_alter < 0 || n_ego + n_alter < 1) fail("need at least one vehicle");
  if (n_tracked < 0 || n_tracked > n_ego) fail("n_tracked must lie in [0, n_ego]");
  if (n_steps < 1) fail("n_steps must be >= 1");
  if (substeps < 1 || !(dt > 0.0)) fail("substeps and dt must be positive");
  if (!(max_brake > 0.0)) fail("max_brake must be > 0");
  if (jam_threshold < 1) fail("jam_threshold must be >= 1");
  if (!(initial_speed_min_fraction >= 0.0 && initial_speed_min_fraction <= 1.0)) {
    fail("initial_speed_min_fraction must lie in [0, 1]");
  }
  if (!(geometry.ring_length > vehicle_length * (n_ego + n_alter))) {
    throw PlacementError("WorldConfig: ring_length too short for the vehicle population");
  }
  ego_params.validate();
  alter_params.validate();
  reward.validate();
}

std::string_view to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::TrackedCrash: return "tracked_crash";
    case TerminationReason::Jam: return "jam";
    case TerminationReason::HorizonReached: return "horizon";
  }
  return "unknown";
}

WorldState init_world(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState w;
  w.config = config;
  w.seed = seed;
  w.rng.seed(hash_seed({seed, 0x776f726c64ULL}));

  const int n = config.n_ego + config.n_alter;
  const double L = config.geometry.ring_length;
  w.vehicles.resize(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> lanes(static_cast<std::size_t>(config.geometry.lane_count));
  for (int i = 0; i < n; ++i) {
    auto& v = w.vehicles[i];
    v.id = i;
    v.role = i < config.n_ego ? traffic::Role::Ego : traffic::Role::Alter;
    v.active_params = v.role == traffic::Role::Ego ? config.ego_params : config.alter_params;
    v.length = config.vehicle_length;
    v.lane = static_cast<int>(uniform_index(w.rng, lanes.size()));
    lanes[v.lane].push_back(i);
  }

  for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
    auto& members = lanes[lane];
    if (members.empty()) continue;
    // Fisher-Yates with the portable index sampler.
    for (std::size_t k = members.size() - 1; k > 0; --k) {
      std::swap(members[k], members[uniform_index(w.rng, k + 1)]);
    }
    double max_min_gap = 0.0;
    for (int id : members) {
      max_min_gap = std::max(max_min_gap, w.vehicles[id].active_params.min_gap);
    }
    const double spacing = L / static_cast<double>(members.size());
    const double slack = spacing - config.vehicle_length - 2.0 * max_min_gap;
    if (slack < 0.0) {
      throw PlacementError("init_world: lane " + std::to_string(lane) + " cannot hold " +
                           std::to_string(members.size()) + " vehicles (seed " +
                           std::to_string(seed) + ")");
    }
    const double lane_offset = uniform(w.rng, 0.0, L);
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto& v = w.vehicles[members[k]];
      const double jitter = uniform(w.rng, -0.5 * slack, 0.5 * slack);
      v.position = wrap_position(lane_offset + static_cast<double>(k) * spacing + jitter, L);
      v.speed = v.active_params.desired_speed *
                uniform(w.rng, config.initial_speed_min_fraction, 1.0);
    }
  }

  w.tracked_ego_ids.reserve(static_cast<std::size_t>(config.n_tracked));
  for (int i = 0; i < config.n_tracked; ++i) w.tracked_ego_ids.push_back(i);
  return w;
}

std::vector<CollisionPair> detect_collisions(WorldState& w) {
  const double L = w.config.geometry.ring_length;
  std::vector<CollisionPair> pairs;
  const int n = static_cast<int>(w.vehicles.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& a = w.vehicles[i];
      const auto& b = w.vehicles[j];
      if (a.lane != b.lane) continue;
      const double d = std::abs(traffic::ring_offset(a.position, b.position, L));
      if (d < 0.5 * (a.length + b.length)) pairs.emplace_back(i, j);
    }
  }
  for (auto [i, j] : pairs) {
    w.vehicles[i].crashed = true;
    w.vehicles[j].crashed = true;
  }
  return pairs;
}

std::optional<TerminationReason> check_termination(const WorldState& w) {
  for (int id : w.tracked_ego_ids) {
    if (w.vehicles[id].crashed) return TerminationReason::TrackedCrash;
  }
  if (crashed_count(w) >= w.config.jam_threshold) return TerminationReason::Jam;
  if (w.step >= w.config.n_steps) return TerminationReason::HorizonReached;
  return std::nullopt;
}

std::vector<int> ego_ids(const WorldState& w) {
  std::vector<int> ids;
  for (const auto& v : w.vehicles) {
    if (v.role == traffic::Role::Ego) ids.push_back(v.id);
  }
  return ids;
}

int crashed_count(const WorldState& w) {
  return static_cast<int>(std::count_if(w.vehicles.begin(), w.vehicles.end(),
                                        [](const VehicleState& v) { return v.crashed; }));
}

std::map<int, reward::RewardBreakdown> score_egos(const WorldState& w) {
  std::map<int, reward::RewardBreakdown> out;
  for (const auto& v : w.vehicles) {
    if (v.role != traffic::Role::Ego) continue;
    out.emplace(v.id, reward::score(v, w.vehicles, w.config.reward, w.config.geometry.ring_length));
  }
  return out;
}

StepOutcome step(WorldState& w) {
  if (w.terminated) throw StateError("step: world already terminated");
  const auto& cfg = w.config;
  const double L = cfg.geometry.ring_length;
  const int n = static_cast<int>(w.vehicles.size());
  const traffic::RoadContext road{cfg.geometry.lane_count, L, cfg.max_brake};
  const bool perturbed = w.perturbation.active();

  StepOutcome out;

  // 1. Lane-change intentions on the step-start state.
  std::vector<Intention> intentions(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& v = w.vehicles[i];
    if (v.crashed || v.lane_change_cooldown_remaining > 0) continue;
    bool flip = false;
    if (perturbed && w.perturbation.lane_change_flip_prob > 0.0 && w.perturbation.perturbs(i)) {
      flip = uniform01(w.rng) < w.perturbation.lane_change_flip_prob;
    }
    intentions[i] = choose_lane(w, v, road, flip);
  }

  // 2. Physics substeps.
  std::vector<double> accel(static_cast<std::size_t>(n));
  for (int sub = 0; sub < cfg.substeps; ++sub) {
    const auto leader = find_leaders(w);
    for (int i = 0; i < n; ++i) {
      const auto& v = w.vehicles[i];
      if (v.crashed) {
        accel[i] = -cfg.max_brake;
        continue;
      }
      std::optional<traffic::Leader> lead;
      if (leader[i] >= 0) {
        const auto& l = w.vehicles[leader[i]];
        const double gap =
            forward_distance(v.position, l.position, L) - 0.5 * (v.length + l.length);
        lead = traffic::Leader{std::max(gap, kGapFloor), l.speed};
      }
      double a = traffic::idm_acceleration(v.speed, lead, v.active_params, cfg.max_brake);
      if (perturbed && w.perturbation.accel_noise_sigma > 0.0 && w.perturbation.perturbs(i)) {
        a += w.perturbation.accel_noise_sigma * standard_normal(w.rng);
        a = std::clamp(a, -cfg.max_brake, v.active_params.max_accel);
      }
      accel[i] = a;
    }
    for (int i = 0; i < n; ++i) {
      auto& v = w.vehicles[i];
      v.speed = std::max(0.0, v.speed + accel[i] * cfg.dt);
      v.position = wrap_position(v.position + v.speed * cfg.dt, L);
    }
    const std::vector<bool> was_crashed = [&] {
      std::vector<bool> c(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) c[i] = w.vehicles[i].crashed;
      return c;
    }();
    for (auto pair : detect_collisions(w)) {
      if (!was_crashed[pair.first] || !was_crashed[pair.second]) {
        out.new_collisions.push_back(pair);
      }
    }
  }

  // 3. Simultaneous lane changes; lower id wins a contested gap.
  std::vector<int> accepted;
  for (int i = 0; i < n; ++i) {
    auto& v = w.vehicles[i];
    const int target = intentions[i].target_lane;
    if (v.lane_change_cooldown_remaining > 0) --v.lane_change_cooldown_remaining;
    if (target < 0 || v.crashed) continue;
    bool contested = false;
    for (int j : accepted) {
      const auto& other = w.vehicles[j];
      if (intentions[j].target_lane != target) continue;
      const double d = std::abs(traffic::ring_offset(v.position, other.position, L));
      if (d < 0.5 * (v.length + other.length) + std::max(v.length, other.length)) {
        contested = true;
        break;
      }
    }
    if (contested) continue;
    accepted.push_back(i);
  }
  for (int i : accepted) {
    auto& v = w.vehicles[i];
    v.lane = intentions[i].target_lane;
    v.lane_change_cooldown_remaining = v.active_params.lane_change_cooldown;
    out.lane_changes.push_back(i);
  }
  if (!accepted.empty()) {
    std::vector<bool> was_crashed(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) was_crashed[i] = w.vehicles[i].crashed;
    for (auto pair : detect_collisions(w)) {
      if (!was_crashed[pair.first] || !was_crashed[pair.second]) {
        out.new_collisions.push_back(pair);
      }
    }
  }

  // 4. Rewards and termination.
  out.per_ego_rewards = score_egos(w);
  ++w.step;
  if (w.enforce_termination) {
    w.terminated = check_termination(w);
    out.terminated = w.terminated;
  }
  return out;
}

}  // namespace gksim::world
