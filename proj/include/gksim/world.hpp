#pragma once

/**
 * The authoritative road world.
 *
 * A closed ring of `lane_count` lanes. One world step is `substeps` physics
 * substeps of `dt` seconds (1.0 s by default). Per world step:
 *   1. lane-change intentions are evaluated on the step-start state, in
 *      ascending vehicle id order;
 *   2. each substep integrates IDM accelerations (semi-implicit Euler) and
 *      detects collisions;
 *   3. intentions are applied simultaneously at step end (lower id wins a
 *      contested gap), followed by another collision check;
 *   4. ego rewards are scored and termination is checked.
 *
 * A WorldState is a plain value: copying it yields an independent world.
 * The only randomness is in placement and in rollout perturbations, both
 * drawn from the world's own generator.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "gksim/random.hpp"
#include "gksim/reward.hpp"
#include "gksim/traffic.hpp"

namespace gksim::world {

struct RoadGeometry {
  int lane_count = 4;
  double lane_width = 4.0;      // m
  double ring_length = 1000.0;  // m
};

struct WorldConfig {
  RoadGeometry geometry{};
  int n_ego = 12;
  int n_alter = 12;
  int n_tracked = 4;     // first n_tracked egos end the run when they crash
  int n_steps = 80;      // HorizonReached at this step count
  int substeps = 10;
  double dt = 0.1;       // s per substep
  double max_brake = traffic::kDefaultMaxBrake;
  double vehicle_length = 5.0;
  int jam_threshold = 6;
  double initial_speed_min_fraction = 0.8;  // initial speed ~ U(frac, 1) * v0
  traffic::PolicyParams ego_params = traffic::hotshot_params();
  traffic::PolicyParams alter_params = traffic::alter_params();
  reward::RewardConfig reward{.distance_floor = 1.0};

  void validate() const;
};

enum class TerminationReason { TrackedCrash, Jam, HorizonReached };
[[nodiscard]] std::string_view to_string(TerminationReason reason);

/// Stochastic behavior injected into rollout clones. Inactive by default.
struct RolloutPerturbation {
  double accel_noise_sigma = 0.0;     // m/s^2, per substep
  double lane_change_flip_prob = 0.0; // inverts a MOBIL decision, never into an occupied slot
  std::vector<bool> exempt;           // indexed by vehicle id

  [[nodiscard]] bool active() const noexcept {
    return accel_noise_sigma > 0.0 || lane_change_flip_prob > 0.0;
  }
  [[nodiscard]] bool perturbs(int id) const {
    return !(static_cast<std::size_t>(id) < exempt.size() && exempt[id]);
  }
};

struct WorldState {
  WorldConfig config;
  std::uint64_t seed = 0;
  std::vector<traffic::VehicleState> vehicles;  // vehicles[i].id == i
  int step = 0;
  Rng rng;
  std::vector<int> tracked_ego_ids;
  std::optional<TerminationReason> terminated;
  RolloutPerturbation perturbation;
  bool enforce_termination = true;
};

using CollisionPair = std::pair<int, int>;  // (lower id, higher id)

struct StepOutcome {
  std::map<int, reward::RewardBreakdown> per_ego_rewards;
  std::vector<CollisionPair> new_collisions;
  std::vector<int> lane_changes;
  std::optional<TerminationReason> terminated;
};

/// Places vehicles: uniform-random lane, shuffled order within the lane,
/// jittered spacing with bumper gaps >= 2 s0. Egos take ids [0, n_ego) and
/// start with config.ego_params; alters follow with config.alter_params.
/// Throws PlacementError when a lane cannot hold its vehicles.
[[nodiscard]] WorldState init_world(const WorldConfig& config, std::uint64_t seed);

/// Advances one world step. Throws StateError on a terminated world.
StepOutcome step(WorldState& world);

/// All same-lane pairs whose centers are closer than half their summed
/// lengths; every vehicle in such a pair is flagged crashed.
std::vector<CollisionPair> detect_collisions(WorldState& world);

[[nodiscard]] std::optional<TerminationReason> check_termination(const WorldState& world);

[[nodiscard]] inline WorldState clone_world(const WorldState& world) { return world; }

[[nodiscard]] std::vector<int> ego_ids(const WorldState& world);
[[nodiscard]] int crashed_count(const WorldState& world);

/// Ego rewards on the current state (what step() reports at its end).
[[nodiscard]] std::map<int, reward::RewardBreakdown> score_egos(const WorldState& world);

}  // namespace gksim::world
