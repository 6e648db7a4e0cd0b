#pragma once

// JSON (de)serialization of experiment configs and run records.
//
// Config documents are nested objects; every key is optional and missing keys
// take the value from default_config(). Unknown keys are rejected so typos do
// not silently fall back to defaults. Schema:
//
//   experiment: n_worlds, n_steps, n_ego, n_alter, n_online, n_tracked,
//               baseline_policy ("defensive" | "hotshot" | null),
//               observe_only, base_seed, output_dir, ci_method ("normal" | "bootstrap")
//   world:      lane_count, lane_width, ring_length, vehicle_length, substeps, dt,
//               max_brake, jam_threshold, initial_speed_min_fraction
//   presets:    defensive | hotshot | alter -> desired_speed, time_headway, min_gap,
//               max_accel, comfort_decel, accel_exponent, politeness,
//               lane_change_gain_threshold, safe_brake_limit, lane_change_cooldown
//   reward:     alpha, sigma, target_speed, kappa, lambda, zeta, rd_max,
//               neighbor_radius, gamma, weight_speed, weight_defensive,
//               weight_collision, distance_floor
//   gatekeeper: n_mc, horizon, cadence, accel_noise_sigma, lane_change_flip_prob,
//               rho_star, neighborhood_radius, graduation_steps

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "gksim/experiment.hpp"

namespace gksim::io {

[[nodiscard]] nlohmann::json config_to_json(const experiment::ExperimentConfig& config);
/// Throws ConfigError on malformed documents or invalid values.
[[nodiscard]] experiment::ExperimentConfig config_from_json(const nlohmann::json& doc);
[[nodiscard]] experiment::ExperimentConfig load_config(const std::filesystem::path& path);

[[nodiscard]] nlohmann::json record_to_json(const experiment::RunRecord& record);
[[nodiscard]] experiment::RunRecord record_from_json(const nlohmann::json& doc);
/// Reads one record per line.
[[nodiscard]] std::vector<experiment::RunRecord> load_records(const std::filesystem::path& path);

}  // namespace gksim::io
