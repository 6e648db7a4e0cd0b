#include "gksim/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gksim/config_io.hpp"
#include "gksim/errors.hpp"
#include "gksim/parallel.hpp"
#include "gksim/random.hpp"

namespace gksim::experiment {

namespace {

constexpr double kZ90 = 1.6448536269514722;  // two-sided 90% normal quantile
constexpr int kBootstrapResamples = 2000;

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

StepStat summarize(int step, std::vector<double>& values, CiMethod method, std::uint64_t seed) {
  StepStat s;
  s.step = step;
  s.n = static_cast<int>(values.size());
  s.mean = mean_of(values);
  if (values.size() < 2) {
    s.lo90 = s.hi90 = s.mean;
    return s;
  }
  if (method == CiMethod::Normal) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
    const double half = kZ90 * sd / std::sqrt(static_cast<double>(values.size()));
    s.lo90 = s.mean - half;
    s.hi90 = s.mean + half;
    return s;
  }
  Rng rng(seed);
  std::vector<double> means(kBootstrapResamples);
  for (double& m : means) {
    double sum = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      sum += values[uniform_index(rng, values.size())];
    }
    m = sum / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  s.lo90 = std::min(s.mean, means[static_cast<std::size_t>(0.05 * (kBootstrapResamples - 1))]);
  s.hi90 = std::max(s.mean, means[static_cast<std::size_t>(0.95 * (kBootstrapResamples - 1))]);
  return s;
}

std::string trajectory_line(int world_index, const world::WorldState& w,
                            const std::vector<std::optional<gatekeeper::Mode>>& modes) {
  nlohmann::json line;
  line["world"] = world_index;
  line["step"] = w.step;
  auto& vehicles = line["vehicles"] = nlohmann::json::array();
  for (const auto& v : w.vehicles) {
    const auto& mode = modes[static_cast<std::size_t>(v.id)];
    vehicles.push_back({{"id", v.id},
                        {"lane", v.lane},
                        {"s", v.position},
                        {"v", v.speed},
                        {"crashed", v.crashed},
                        {"mode", mode ? std::string(gatekeeper::to_string(*mode))
                                      : std::string(v.role == traffic::Role::Ego ? "ego" : "alter")}});
  }
  return line.dump();
}

}  // namespace

std::string_view to_string(BaselinePolicy policy) {
  return policy == BaselinePolicy::Defensive ? "defensive" : "hotshot";
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("ExperimentConfig: " + msg); };
  if (n_worlds < 1) fail("n_worlds must be >= 1");
  if (n_online < 0 || n_online > world.n_ego) fail("n_online must lie in [0, n_ego]");
  if (baseline_policy && n_online > 0 && !observe_only) {
    fail("baseline runs need n_online = 0 (or observe_only)");
  }
  if (!(neighborhood_radius >= 0.0)) fail("neighborhood_radius must be >= 0");
  if (modes.graduation_steps < 1) fail("graduation_steps must be >= 1");
  try {
    world_config().validate();
    modes.hotshot.validate();
    modes.defensive.validate();
    mc.validate();
    (void)gatekeeper::Thresholds::from_rho_star(rho_star);
  } catch (const DomainError& e) {
    fail(e.what());
  } catch (const PlacementError& e) {
    fail(e.what());
  }
}

world::WorldConfig ExperimentConfig::world_config() const {
  world::WorldConfig w = world;
  w.ego_params = baseline_policy == BaselinePolicy::Defensive ? modes.defensive : modes.hotshot;
  return w;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  // Braking capability below Hotshot's comfortable deceleration (7 m/s^2):
  // tailgating at T = 0.6 s can end in a rear-end crash, T = 2 s cannot. With
  // a 9 m/s^2 limit IDM plus the MOBIL safety check is collision-free.
  c.world.max_brake = 6.0;
  // Collision penalty scaled so CRE crosses rho* = 2 when a crash is plausible
  // within the horizon; at unit weight CRE stays near -12 and never switches.
  c.world.reward.weight_collision = 75.0;
  return c;
}

RunRecord run_world(const ExperimentConfig& config, int world_index, const RunOptions& options) {
  RunRecord rec;
  rec.world_index = world_index;
  rec.seed = config.base_seed + static_cast<std::uint64_t>(world_index);

  world::WorldState w = world::init_world(config.world_config(), rec.seed);
  const auto egos = world::ego_ids(w);
  const bool egos_start_defensive = config.baseline_policy == BaselinePolicy::Defensive;

  std::vector<int> online(egos.begin(), egos.begin() + config.n_online);
  std::vector<gatekeeper::GatekeeperState> gk;
  for (int id : online) {
    gk.push_back({.vehicle_id = id,
                  .mode = egos_start_defensive ? gatekeeper::Mode::Defensive
                                               : gatekeeper::Mode::Hotshot,
                  .transition = std::nullopt,
                  .last_risk = std::nullopt});
  }
  const auto thresholds = gatekeeper::Thresholds::from_rho_star(config.rho_star);
  const int n_ego = static_cast<int>(egos.size());

  auto ego_modes = [&] {
    std::vector<std::optional<gatekeeper::Mode>> modes(w.vehicles.size());
    for (int id : egos) {
      modes[id] = egos_start_defensive ? gatekeeper::Mode::Defensive : gatekeeper::Mode::Hotshot;
    }
    for (const auto& g : gk) modes[g.vehicle_id] = g.mode;
    return modes;
  };

  if (options.dump_trajectories) rec.trajectory.push_back(trajectory_line(world_index, w, ego_modes()));

  double crashed = 0.0;
  for (int t = 0; t < config.world.n_steps && !w.terminated; ++t) {
    if (!online.empty() && t % config.mc.cadence == 0) {
      const auto risks =
          gatekeeper::estimate_cre(w, config.mc, config.world.reward, online, /*workers=*/1);
      const auto averaged =
          gatekeeper::neighborhood_average(risks, w, online, config.neighborhood_radius);
      ++rec.n_evaluations;

      RiskPoint point{.step = t};
      for (int id : online) {
        const auto& est = risks.at(id);
        point.risk += est.cre;
        point.averaged_risk += averaged.at(id);
        point.energy += mean_of(est.expected_step_loss);
      }
      const double k = static_cast<double>(online.size());
      point.risk /= k;
      point.averaged_risk /= k;
      point.energy /= k;
      rec.risk.push_back(point);

      for (auto& g : gk) {
        if (!config.observe_only) {
          g = gatekeeper::decide(g, averaged.at(g.vehicle_id), thresholds, config.modes);
        } else {
          g.last_risk = averaged.at(g.vehicle_id);
        }
        if (options.dump_risk) {
          const auto& est = risks.at(g.vehicle_id);
          rec.risk_log.push_back({t, g.vehicle_id, est.cre, averaged.at(g.vehicle_id), g.mode,
                                  est.sample_std});
        }
      }
    }

    for (auto& g : gk) {
      if (!g.transition) continue;
      auto [next_state, vehicle] =
          gatekeeper::apply_transition(g, w.vehicles[static_cast<std::size_t>(g.vehicle_id)]);
      g = std::move(next_state);
      w.vehicles[static_cast<std::size_t>(g.vehicle_id)] = std::move(vehicle);
    }

    const auto outcome = world::step(w);

    double rs = 0.0, rd = 0.0, loss = 0.0;
    for (const auto& [id, b] : outcome.per_ego_rewards) {
      rs += b.r_speed;
      rd += b.r_defensive;
      loss += b.loss;
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, outcome.per_ego_rewards.size()));
    rec.r_speed.push_back(rs / n);
    rec.r_defensive.push_back(rd / n);
    rec.loss.push_back(loss / n);
    if (outcome.terminated == world::TerminationReason::TrackedCrash) crashed = 1.0;
    rec.crashed.push_back(crashed);

    int defensive = 0;
    for (const auto& m : ego_modes()) {
      if (m == gatekeeper::Mode::Defensive) ++defensive;
    }
    rec.defensive_fraction.push_back(n_ego > 0 ? static_cast<double>(defensive) / n_ego : 0.0);

    if (options.dump_trajectories) {
      rec.trajectory.push_back(trajectory_line(world_index, w, ego_modes()));
    }
  }
  rec.termination = w.terminated.value_or(world::TerminationReason::HorizonReached);
  rec.termination_step = w.step;
  return rec;
}

std::vector<RunRecord> run_batch(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  std::vector<RunRecord> records(static_cast<std::size_t>(config.n_worlds));
  parallel_for(records.size(), options.workers, [&](std::size_t i) {
    try {
      records[i] = run_world(config, static_cast<int>(i), options);
    } catch (const PlacementError& e) {
      throw PlacementError("world " + std::to_string(i) + ": " + e.what());
    }
  });
  return records;
}

const QuantitySeries* AggregateStats::find(std::string_view name) const {
  for (const auto& s : series) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

AggregateStats aggregate(const std::vector<RunRecord>& records, CiMethod method) {
  if (records.empty()) throw DomainError("aggregate: no records");
  std::size_t max_len = 0;
  for (const auto& r : records) max_len = std::max(max_len, r.loss.size());

  AggregateStats stats;
  std::uint64_t ci_seed = 0;
  auto per_step = [&](std::string_view name, auto&& value_at) {
    QuantitySeries series{std::string(name), {}};
    for (std::size_t t = 0; t < max_len; ++t) {
      std::vector<double> values;
      for (const auto& r : records) {
        if (auto v = value_at(r, t)) values.push_back(*v);
      }
      if (values.empty()) continue;
      series.points.push_back(summarize(static_cast<int>(t), values, method, ++ci_seed));
    }
    if (!series.points.empty()) stats.series.push_back(std::move(series));
  };
  auto alive = [](const std::vector<double> RunRecord::*field) {
    return [field](const RunRecord& r, std::size_t t) -> std::optional<double> {
      const auto& xs = r.*field;
      if (t < xs.size()) return xs[t];
      return std::nullopt;
    };
  };
  auto risk_field = [](double RiskPoint::*field) {
    return [field](const RunRecord& r, std::size_t t) -> std::optional<double> {
      for (const auto& p : r.risk) {
        if (p.step == static_cast<int>(t)) return p.*field;
      }
      return std::nullopt;
    };
  };

  per_step(kQuantityRD, alive(&RunRecord::r_defensive));
  per_step(kQuantityRS, alive(&RunRecord::r_speed));
  per_step(kQuantityLoss, alive(&RunRecord::loss));
  per_step(kQuantityCrashed, [](const RunRecord& r, std::size_t t) -> std::optional<double> {
    if (r.crashed.empty()) return 0.0;
    return t < r.crashed.size() ? r.crashed[t] : r.crashed.back();
  });
  per_step(kQuantityDefensive, alive(&RunRecord::defensive_fraction));
  per_step(kQuantityEnergy, risk_field(&RiskPoint::energy));
  per_step(kQuantityRisk, risk_field(&RiskPoint::risk));

  if (const auto* crashed = stats.find(kQuantityCrashed)) {
    for (const auto& p : crashed->points) stats.crash_curve.push_back(p.mean);
  }
  return stats;
}

std::string timeseries_csv(const AggregateStats& stats) {
  std::ostringstream out;
  out << "step,quantity,mean,lo90,hi90,n\n";
  for (const auto& s : stats.series) {
    for (const auto& p : s.points) {
      out << p.step << ',' << s.name << ',' << format_double(p.mean) << ','
          << format_double(p.lo90) << ',' << format_double(p.hi90) << ',' << p.n << '\n';
    }
  }
  return out.str();
}

void emit(const AggregateStats& stats, const std::vector<RunRecord>& records,
          const ExperimentConfig& config, const std::filesystem::path& dir, bool write_runs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("emit: cannot create " + dir.string() + ": " + ec.message());
  }
  auto open = [](const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("emit: cannot open " + path.string() + " for writing");
    return f;
  };
  auto close = [](std::ofstream& f, const std::filesystem::path& path) {
    f.flush();
    if (!f) throw std::runtime_error("emit: write failed for " + path.string());
  };

  nlohmann::json summary;
  summary["config"] = io::config_to_json(config);
  int tracked_crashes = 0, jams = 0, evaluations = 0;
  double final_loss = 0.0, defensive = 0.0;
  int with_steps = 0;
  for (const auto& r : records) {
    if (r.termination == world::TerminationReason::TrackedCrash) ++tracked_crashes;
    if (r.termination == world::TerminationReason::Jam) ++jams;
    evaluations += r.n_evaluations;
    if (!r.loss.empty()) {
      final_loss += r.loss.back();
      defensive += mean_of(r.defensive_fraction);
      ++with_steps;
    }
  }
  summary["n_worlds"] = records.size();
  summary["total_crashes"] = tracked_crashes;
  summary["jams"] = jams;
  summary["gatekeeper_evaluations"] = evaluations;
  summary["mean_final_loss"] = with_steps ? final_loss / with_steps : 0.0;
  summary["mean_defensive_fraction"] = with_steps ? defensive / with_steps : 0.0;
  summary["final_crash_fraction"] = stats.crash_curve.empty() ? 0.0 : stats.crash_curve.back();

  {
    const auto path = dir / "summary.json";
    auto f = open(path);
    f << summary.dump(2) << '\n';
    close(f, path);
  }
  {
    const auto path = dir / "timeseries.csv";
    auto f = open(path);
    f << timeseries_csv(stats);
    close(f, path);
  }
  if (write_runs) {
    const auto path = dir / "runs.jsonl";
    auto f = open(path);
    for (const auto& r : records) f << io::record_to_json(r).dump() << '\n';
    close(f, path);
  }
  const bool any_traj = std::any_of(records.begin(), records.end(),
                                    [](const RunRecord& r) { return !r.trajectory.empty(); });
  if (any_traj) {
    const auto path = dir / "trajectories.jsonl";
    auto f = open(path);
    for (const auto& r : records) {
      for (const auto& line : r.trajectory) f << line << '\n';
    }
    close(f, path);
  }
  const bool any_risk = std::any_of(records.begin(), records.end(),
                                    [](const RunRecord& r) { return !r.risk_log.empty(); });
  if (any_risk) {
    const auto path = dir / "risk.jsonl";
    auto f = open(path);
    for (const auto& r : records) {
      for (const auto& e : r.risk_log) {
        nlohmann::json line{{"world", r.world_index},
                            {"step", e.step},
                            {"ego_id", e.ego_id},
                            {"cre", e.cre},
                            {"averaged_cre", e.averaged_cre},
                            {"mode", gatekeeper::to_string(e.mode)},
                            {"sample_std", e.sample_std}};
        f << line.dump() << '\n';
      }
    }
    close(f, path);
  }
}

}  // namespace gksim::experiment
