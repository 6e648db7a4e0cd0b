#include "gksim/gatekeeper.hpp"

#include <cmath>
#include <string>

#include "gksim/errors.hpp"
#include "gksim/fep_math.hpp"
#include "gksim/parallel.hpp"
#include "gksim/random.hpp"

namespace gksim::gatekeeper {

void MCConfig::validate() const {
  auto fail = [](const char* msg) { throw DomainError(std::string("MCConfig: ") + msg); };
  if (n_mc < 1) fail("n_mc must be >= 1");
  if (horizon < 1) fail("horizon must be >= 1");
  if (cadence < 1) fail("cadence must be >= 1");
  if (!(accel_noise_sigma >= 0.0)) fail("accel_noise_sigma must be >= 0");
  if (!(lane_change_flip_prob >= 0.0 && lane_change_flip_prob <= 1.0)) {
    fail("lane_change_flip_prob must lie in [0, 1]");
  }
}

std::uint64_t rollout_seed(std::uint64_t world_seed, int world_step, int rollout_index) {
  return hash_seed({world_seed, 0x726f6c6c6f7574ULL, static_cast<std::uint64_t>(world_step),
                    static_cast<std::uint64_t>(rollout_index)});
}

RolloutResult rollout(const world::WorldState& world, std::uint64_t seed, const MCConfig& config,
                      const reward::RewardConfig& reward_config,
                      std::span<const int> subject_ids) {
  if (world.terminated) throw StateError("rollout: world already terminated");
  config.validate();

  world::WorldState sim = world::clone_world(world);
  sim.config.reward = reward_config;
  sim.enforce_termination = false;
  sim.rng.seed(seed);
  sim.perturbation.accel_noise_sigma = config.accel_noise_sigma;
  sim.perturbation.lane_change_flip_prob = config.lane_change_flip_prob;
  sim.perturbation.exempt.assign(sim.vehicles.size(), false);
  for (int id : subject_ids) sim.perturbation.exempt.at(static_cast<std::size_t>(id)) = true;

  RolloutResult out;
  for (int id : world::ego_ids(sim)) {
    out.step_losses[id].reserve(static_cast<std::size_t>(config.horizon));
  }
  for (int t = 0; t < config.horizon; ++t) {
    const auto outcome = world::step(sim);
    for (const auto& [id, breakdown] : outcome.per_ego_rewards) {
      out.step_losses[id].push_back(breakdown.loss);
    }
  }
  for (const auto& [id, losses] : out.step_losses) {
    out.discounted_loss[id] = fep::cumulative_risk(losses, reward_config.gamma);
  }
  return out;
}

std::map<int, RiskEstimate> estimate_cre(const world::WorldState& world, const MCConfig& config,
                                         const reward::RewardConfig& reward_config,
                                         std::span<const int> subject_ids, int workers) {
  if (config.n_mc < 1) throw DomainError("estimate_cre: n_mc must be >= 1");
  config.validate();

  std::vector<RolloutResult> results(static_cast<std::size_t>(config.n_mc));
  parallel_for(results.size(), workers, [&](std::size_t r) {
    results[r] = rollout(world, rollout_seed(world.seed, world.step, static_cast<int>(r)), config,
                         reward_config, subject_ids);
  });

  const double n = static_cast<double>(config.n_mc);
  std::map<int, RiskEstimate> out;
  for (const auto& [id, _] : results.front().discounted_loss) {
    RiskEstimate est;
    est.vehicle_id = id;
    est.n_samples = config.n_mc;
    est.expected_step_loss.assign(static_cast<std::size_t>(config.horizon), 0.0);

    double sum = 0.0;
    for (const auto& r : results) {
      sum += r.discounted_loss.at(id);
      const auto& losses = r.step_losses.at(id);
      for (std::size_t t = 0; t < losses.size(); ++t) est.expected_step_loss[t] += losses[t];
    }
    for (double& e : est.expected_step_loss) e /= n;
    est.energy_mean = sum / n;

    double sq = 0.0;
    for (const auto& r : results) {
      const double d = r.discounted_loss.at(id) - est.energy_mean;
      sq += d * d;
    }
    est.sample_std = config.n_mc > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;

    // Entropy-dropped instantaneous risks, then discounted aggregation.
    std::vector<double> step_risk(est.expected_step_loss.size());
    for (std::size_t t = 0; t < step_risk.size(); ++t) {
      step_risk[t] = fep::instantaneous_risk(est.expected_step_loss[t], 0.0, 1.0,
                                             fep::EntropySign::Dropped);
    }
    est.cre = fep::cumulative_risk(step_risk, reward_config.gamma);
    out.emplace(id, std::move(est));
  }
  return out;
}

std::map<int, double> neighborhood_average(const std::map<int, RiskEstimate>& risks,
                                           const world::WorldState& world,
                                           std::span<const int> online_ids, double radius) {
  const double L = world.config.geometry.ring_length;
  std::map<int, double> out;
  for (int j : online_ids) {
    const double sj = world.vehicles.at(static_cast<std::size_t>(j)).position;
    double sum = 0.0;
    int count = 0;
    for (int i : online_ids) {
      const double si = world.vehicles.at(static_cast<std::size_t>(i)).position;
      if (i != j && std::abs(traffic::ring_offset(sj, si, L)) > radius) continue;
      sum += risks.at(i).cre;
      ++count;
    }
    out[j] = sum / static_cast<double>(count);
  }
  return out;
}

Thresholds Thresholds::from_rho_star(double rho_star) {
  if (!(rho_star > 0.0) || !std::isfinite(rho_star)) {
    throw DomainError("Thresholds: rho_star must be positive");
  }
  return {rho_star, 1.1 * rho_star, 0.9 * rho_star};
}

std::string_view to_string(Mode mode) {
  return mode == Mode::Hotshot ? "hotshot" : "defensive";
}

traffic::PolicyParams current_params(const GatekeeperState& state, const ModeParams& modes) {
  if (!state.transition) return modes.of(state.mode);
  const auto& tr = *state.transition;
  const double fraction = static_cast<double>(tr.total_steps - tr.steps_remaining) /
                          static_cast<double>(tr.total_steps);
  return traffic::interpolate_params(tr.from, tr.to, fraction);
}

GatekeeperState decide(const GatekeeperState& state, double averaged_risk,
                       const Thresholds& thresholds, const ModeParams& modes) {
  GatekeeperState next = state;
  next.last_risk = averaged_risk;
  std::optional<Mode> target;
  if (state.mode == Mode::Hotshot && averaged_risk > thresholds.rho_plus) {
    target = Mode::Defensive;
  } else if (state.mode == Mode::Defensive && averaged_risk < thresholds.rho_minus) {
    target = Mode::Hotshot;
  }
  if (!target) return next;

  next.mode = *target;
  next.transition = Transition{current_params(state, modes), modes.of(*target),
                               modes.graduation_steps, modes.graduation_steps};
  return next;
}

std::pair<GatekeeperState, traffic::VehicleState> apply_transition(
    const GatekeeperState& state, const traffic::VehicleState& vehicle) {
  if (!state.transition) throw StateError("apply_transition: no active transition");
  GatekeeperState next = state;
  traffic::VehicleState v = vehicle;
  auto& tr = *next.transition;
  --tr.steps_remaining;
  const double fraction = static_cast<double>(tr.total_steps - tr.steps_remaining) /
                          static_cast<double>(tr.total_steps);
  v.active_params = traffic::interpolate_params(tr.from, tr.to, fraction);
  if (tr.steps_remaining <= 0) next.transition.reset();
  return {next, v};
}

}  // namespace gksim::gatekeeper
