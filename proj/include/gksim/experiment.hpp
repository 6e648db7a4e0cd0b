#pragma once

/**
 * Batch experiments: many seeded worlds run to termination, per-step
 * aggregation with 90% confidence intervals, and file emission.
 *
 * World i uses seed base_seed + i. Worlds run in parallel but every result
 * lands in its own slot, so output is identical for any worker count.
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gksim/gatekeeper.hpp"
#include "gksim/world.hpp"

namespace gksim::experiment {

enum class BaselinePolicy { Defensive, Hotshot };
[[nodiscard]] std::string_view to_string(BaselinePolicy policy);

enum class CiMethod { Normal, Bootstrap };

struct ExperimentConfig {
  int n_worlds = 1200;
  int n_online = 12;  // online egos take ids [0, n_online)
  std::optional<BaselinePolicy> baseline_policy;
  bool observe_only = false;  // gatekeepers estimate risk but never switch
  std::uint64_t base_seed = 0;
  world::WorldConfig world{};  // counts, geometry, alter preset, rewards
  gatekeeper::ModeParams modes{};
  gatekeeper::MCConfig mc{};
  double rho_star = 2.0;
  double neighborhood_radius = 60.0;
  CiMethod ci_method = CiMethod::Normal;
  std::string output_dir = "out";

  void validate() const;
  /// World config with the egos' starting policy applied.
  [[nodiscard]] world::WorldConfig world_config() const;
};

/// Desk-scale defaults (tuned constants; see configs/default.json).
[[nodiscard]] ExperimentConfig default_config();

struct RunOptions {
  int workers = 0;  // 0 = hardware concurrency
  bool dump_trajectories = false;
  bool dump_risk = false;
};

struct RiskPoint {
  int step = 0;
  double risk = 0.0;           // mean CRE over online egos
  double averaged_risk = 0.0;  // mean neighborhood-averaged CRE over online egos
  double energy = 0.0;         // mean per-step expected loss over online egos
};

struct RiskLogEntry {
  int step = 0;
  int ego_id = 0;
  double cre = 0.0;
  double averaged_cre = 0.0;
  gatekeeper::Mode mode = gatekeeper::Mode::Hotshot;
  double sample_std = 0.0;
};

struct RunRecord {
  int world_index = 0;
  std::uint64_t seed = 0;
  world::TerminationReason termination = world::TerminationReason::HorizonReached;
  int termination_step = 0;  // world steps executed
  // Per executed step, means over all egos.
  std::vector<double> r_speed;
  std::vector<double> r_defensive;
  std::vector<double> loss;
  std::vector<double> crashed;             // 1 once a tracked ego has crashed
  std::vector<double> defensive_fraction;  // egos in Defensive policy / n_ego
  std::vector<RiskPoint> risk;
  int n_evaluations = 0;
  std::vector<RiskLogEntry> risk_log;    // filled when dump_risk
  std::vector<std::string> trajectory;   // JSON lines, filled when dump_trajectories
};

[[nodiscard]] RunRecord run_world(const ExperimentConfig& config, int world_index,
                                  const RunOptions& options = {});
[[nodiscard]] std::vector<RunRecord> run_batch(const ExperimentConfig& config,
                                               const RunOptions& options = {});

struct StepStat {
  int step = 0;
  double mean = 0.0;
  double lo90 = 0.0;
  double hi90 = 0.0;
  int n = 0;
};

struct QuantitySeries {
  std::string name;
  std::vector<StepStat> points;
};

inline constexpr std::string_view kQuantityRD = "R_D";
inline constexpr std::string_view kQuantityRS = "R_S";
inline constexpr std::string_view kQuantityLoss = "Loss";
inline constexpr std::string_view kQuantityCrashed = "Crashed";
inline constexpr std::string_view kQuantityDefensive = "Fraction Defensive";
inline constexpr std::string_view kQuantityEnergy = "E[Energy]";
inline constexpr std::string_view kQuantityRisk = "Risk";

struct AggregateStats {
  std::vector<QuantitySeries> series;  // only quantities with data
  std::vector<double> crash_curve;     // fraction of all worlds crashed by step t

  [[nodiscard]] const QuantitySeries* find(std::string_view name) const;
};

/// Per-step mean over worlds alive at that step with a 90% interval
/// (normal approximation: mean +- 1.645 s / sqrt(n); or percentile bootstrap).
/// Crashed counts every world, terminated ones carrying their final state.
/// Throws DomainError on an empty record list.
[[nodiscard]] AggregateStats aggregate(const std::vector<RunRecord>& records,
                                       CiMethod method = CiMethod::Normal);

/// Writes summary.json, timeseries.csv and, when requested, runs.jsonl plus
/// trajectories.jsonl / risk.jsonl for records that carry dumps.
void emit(const AggregateStats& stats, const std::vector<RunRecord>& records,
          const ExperimentConfig& config, const std::filesystem::path& output_dir,
          bool write_runs = true);

/// CSV body of timeseries.csv.
[[nodiscard]] std::string timeseries_csv(const AggregateStats& stats);

}  // namespace gksim::experiment
