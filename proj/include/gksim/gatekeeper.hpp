#pragma once

/**
 * Per-ego risk monitoring and policy control.
 *
 * A gatekeeper evaluation runs n_mc perturbed rollouts of a cloned world out
 * to `horizon` steps and scores every ego on each. With entropic terms
 * dropped, an ego's cumulative risk exposure is its expected discounted loss
 * over those futures. Online egos average the risk over their spatial
 * neighborhood and a dual-threshold controller switches their policy between
 * Hotshot and Defensive, blending parameters over `graduation_steps` steps.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "gksim/reward.hpp"
#include "gksim/traffic.hpp"
#include "gksim/world.hpp"

namespace gksim::gatekeeper {

struct MCConfig {
  int n_mc = 128;
  int horizon = 10;   // tau, world steps
  int cadence = 5;    // world steps between evaluations
  double accel_noise_sigma = 0.5;
  double lane_change_flip_prob = 0.05;

  void validate() const;
};

/// Deterministic sub-seed for one rollout of one evaluation. Independent of
/// the ego, so one rollout batch scores every ego.
[[nodiscard]] std::uint64_t rollout_seed(std::uint64_t world_seed, int world_step,
                                         int rollout_index);

struct RolloutResult {
  std::map<int, double> discounted_loss;           // per ego
  std::map<int, std::vector<double>> step_losses;  // per ego, length horizon
};

/**
 * One perturbed future. The world is cloned, reseeded with `seed`, and
 * stepped `horizon` times with gatekeeping frozen and termination rules
 * suspended. Vehicles in `subject_ids` are driven by their own (known)
 * controllers; every other vehicle receives acceleration noise and MOBIL
 * decision flips. Throws StateError on a terminated world.
 */
[[nodiscard]] RolloutResult rollout(const world::WorldState& world, std::uint64_t seed,
                                    const MCConfig& config,
                                    const reward::RewardConfig& reward_config,
                                    std::span<const int> subject_ids);

struct RiskEstimate {
  int vehicle_id = 0;
  double cre = 0.0;          // sum_t gamma^t E[L_t]
  double energy_mean = 0.0;  // mean over rollouts of the discounted loss
  double sample_std = 0.0;   // std of the per-rollout discounted loss
  int n_samples = 0;
  std::vector<double> expected_step_loss;  // E[L_t] for t < horizon
};

/// n_mc rollouts (in parallel on `workers` threads; reduced in index order).
[[nodiscard]] std::map<int, RiskEstimate> estimate_cre(const world::WorldState& world,
                                                       const MCConfig& config,
                                                       const reward::RewardConfig& reward_config,
                                                       std::span<const int> subject_ids,
                                                       int workers = 1);

/// For each online ego: mean cre over online egos within ring distance
/// `radius` (any lane), itself included.
[[nodiscard]] std::map<int, double> neighborhood_average(
    const std::map<int, RiskEstimate>& risks, const world::WorldState& world,
    std::span<const int> online_ids, double radius);

struct Thresholds {
  double rho_star = 2.0;
  double rho_plus = 2.2;
  double rho_minus = 1.8;

  /// rho_plus = 1.1 rho_star, rho_minus = 0.9 rho_star. rho_star must be > 0.
  static Thresholds from_rho_star(double rho_star);
};

enum class Mode { Hotshot, Defensive };
[[nodiscard]] std::string_view to_string(Mode mode);

struct Transition {
  traffic::PolicyParams from;
  traffic::PolicyParams to;
  int steps_remaining = 0;
  int total_steps = 10;
};

struct GatekeeperState {
  int vehicle_id = 0;
  Mode mode = Mode::Hotshot;
  std::optional<Transition> transition;
  std::optional<double> last_risk;
};

struct ModeParams {
  traffic::PolicyParams hotshot = traffic::hotshot_params();
  traffic::PolicyParams defensive = traffic::defensive_params();
  int graduation_steps = 10;

  [[nodiscard]] const traffic::PolicyParams& of(Mode mode) const {
    return mode == Mode::Hotshot ? hotshot : defensive;
  }
};

/// Parameters the controller is currently commanding.
[[nodiscard]] traffic::PolicyParams current_params(const GatekeeperState& state,
                                                   const ModeParams& modes);

/// Hysteresis switch: Hotshot -> Defensive above rho_plus, Defensive ->
/// Hotshot below rho_minus, sticky in between. A switch starts a fresh
/// graduation from the current (possibly mid-transition) parameters.
[[nodiscard]] GatekeeperState decide(const GatekeeperState& state, double averaged_risk,
                                     const Thresholds& thresholds, const ModeParams& modes);

/// Advances the graduation one step and writes the blended params into the
/// vehicle. Throws StateError without an active transition.
[[nodiscard]] std::pair<GatekeeperState, traffic::VehicleState> apply_transition(
    const GatekeeperState& state, const traffic::VehicleState& vehicle);

}  // namespace gksim::gatekeeper
