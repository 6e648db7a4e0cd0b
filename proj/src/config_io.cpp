#include "gksim/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "gksim/errors.hpp"

namespace gksim::io {

using nlohmann::json;
using experiment::ExperimentConfig;

namespace {

// Reads members of one JSON object into fields, rejecting unknown keys.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    const auto& node = doc.at(name_);
    if (!node.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
    node_ = &node;
  }
  Section(const json* node, std::string name) : node_(node), name_(std::move(name)) {
    if (node_ != nullptr && !node_->is_object()) {
      throw ConfigError("config: '" + name_ + "' must be an object");
    }
  }

  template <typename T>
  Section& get(const char* key, T& field) {
    known_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) return *this;
    const auto& v = node_->at(key);
    try {
      if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw ConfigError("expected an integer");
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("expected a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("expected a string");
      }
      field = v.get<T>();
    } catch (const std::exception& e) {
      throw ConfigError("config: " + name_ + "." + key + ": " + e.what());
    }
    return *this;
  }

  [[nodiscard]] const json* child(const char* key) {
    known_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  [[nodiscard]] const json* raw(const char* key) { return child(key); }

  void finish() const {
    if (node_ == nullptr) return;
    for (const auto& [key, _] : node_->items()) {
      if (!known_.contains(key)) {
        throw ConfigError("config: unknown key '" + name_ + "." + key + "'");
      }
    }
  }

 private:
  const json* node_ = nullptr;
  std::string name_;
  std::set<std::string> known_;
};

json params_to_json(const traffic::PolicyParams& p) {
  return {{"desired_speed", p.desired_speed},
          {"time_headway", p.time_headway},
          {"min_gap", p.min_gap},
          {"max_accel", p.max_accel},
          {"comfort_decel", p.comfort_decel},
          {"accel_exponent", p.accel_exponent},
          {"politeness", p.politeness},
          {"lane_change_gain_threshold", p.lane_change_gain_threshold},
          {"safe_brake_limit", p.safe_brake_limit},
          {"lane_change_cooldown", p.lane_change_cooldown}};
}

void params_from_json(const json* node, const std::string& name, traffic::PolicyParams& p) {
  Section s(node, name);
  s.get("desired_speed", p.desired_speed)
      .get("time_headway", p.time_headway)
      .get("min_gap", p.min_gap)
      .get("max_accel", p.max_accel)
      .get("comfort_decel", p.comfort_decel)
      .get("accel_exponent", p.accel_exponent)
      .get("politeness", p.politeness)
      .get("lane_change_gain_threshold", p.lane_change_gain_threshold)
      .get("safe_brake_limit", p.safe_brake_limit)
      .get("lane_change_cooldown", p.lane_change_cooldown);
  s.finish();
}

world::TerminationReason termination_from(const std::string& s) {
  if (s == "tracked_crash") return world::TerminationReason::TrackedCrash;
  if (s == "jam") return world::TerminationReason::Jam;
  if (s == "horizon") return world::TerminationReason::HorizonReached;
  throw ConfigError("record: unknown termination '" + s + "'");
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json doc;
  const auto& w = c.world;
  doc["experiment"] = {
      {"n_worlds", c.n_worlds},
      {"n_steps", w.n_steps},
      {"n_ego", w.n_ego},
      {"n_alter", w.n_alter},
      {"n_online", c.n_online},
      {"n_tracked", w.n_tracked},
      {"baseline_policy",
       c.baseline_policy ? json(std::string(experiment::to_string(*c.baseline_policy))) : json()},
      {"observe_only", c.observe_only},
      {"base_seed", c.base_seed},
      {"output_dir", c.output_dir},
      {"ci_method", c.ci_method == experiment::CiMethod::Normal ? "normal" : "bootstrap"}};
  doc["world"] = {{"lane_count", w.geometry.lane_count},
                  {"lane_width", w.geometry.lane_width},
                  {"ring_length", w.geometry.ring_length},
                  {"vehicle_length", w.vehicle_length},
                  {"substeps", w.substeps},
                  {"dt", w.dt},
                  {"max_brake", w.max_brake},
                  {"jam_threshold", w.jam_threshold},
                  {"initial_speed_min_fraction", w.initial_speed_min_fraction}};
  doc["presets"] = {{"defensive", params_to_json(c.modes.defensive)},
                    {"hotshot", params_to_json(c.modes.hotshot)},
                    {"alter", params_to_json(w.alter_params)}};
  const auto& r = w.reward;
  doc["reward"] = {{"alpha", r.alpha},
                   {"sigma", r.sigma},
                   {"target_speed", r.target_speed},
                   {"kappa", r.kappa},
                   {"lambda", r.lambda},
                   {"zeta", r.zeta},
                   {"rd_max", r.rd_max},
                   {"neighbor_radius", r.neighbor_radius},
                   {"gamma", r.gamma},
                   {"weight_speed", r.weight_speed},
                   {"weight_defensive", r.weight_defensive},
                   {"weight_collision", r.weight_collision},
                   {"distance_floor", r.distance_floor}};
  doc["gatekeeper"] = {{"n_mc", c.mc.n_mc},
                       {"horizon", c.mc.horizon},
                       {"cadence", c.mc.cadence},
                       {"accel_noise_sigma", c.mc.accel_noise_sigma},
                       {"lane_change_flip_prob", c.mc.lane_change_flip_prob},
                       {"rho_star", c.rho_star},
                       {"neighborhood_radius", c.neighborhood_radius},
                       {"graduation_steps", c.modes.graduation_steps}};
  return doc;
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig c = experiment::default_config();
  auto& w = c.world;

  Section top(&doc, "<root>");
  {
    Section s(top.child("experiment"), "experiment");
    std::string output_dir = c.output_dir;
    s.get("n_worlds", c.n_worlds)
        .get("n_steps", w.n_steps)
        .get("n_ego", w.n_ego)
        .get("n_alter", w.n_alter)
        .get("n_online", c.n_online)
        .get("n_tracked", w.n_tracked)
        .get("observe_only", c.observe_only)
        .get("base_seed", c.base_seed)
        .get("output_dir", c.output_dir);
    if (const json* policy = s.raw("baseline_policy")) {
      if (policy->is_null()) {
        c.baseline_policy.reset();
      } else if (*policy == "defensive") {
        c.baseline_policy = experiment::BaselinePolicy::Defensive;
      } else if (*policy == "hotshot") {
        c.baseline_policy = experiment::BaselinePolicy::Hotshot;
      } else {
        throw ConfigError("config: experiment.baseline_policy must be defensive, hotshot or null");
      }
    }
    if (const json* ci = s.raw("ci_method")) {
      if (*ci == "normal") {
        c.ci_method = experiment::CiMethod::Normal;
      } else if (*ci == "bootstrap") {
        c.ci_method = experiment::CiMethod::Bootstrap;
      } else {
        throw ConfigError("config: experiment.ci_method must be normal or bootstrap");
      }
    }
    s.finish();
  }
  {
    Section s(top.child("world"), "world");
    s.get("lane_count", w.geometry.lane_count)
        .get("lane_width", w.geometry.lane_width)
        .get("ring_length", w.geometry.ring_length)
        .get("vehicle_length", w.vehicle_length)
        .get("substeps", w.substeps)
        .get("dt", w.dt)
        .get("max_brake", w.max_brake)
        .get("jam_threshold", w.jam_threshold)
        .get("initial_speed_min_fraction", w.initial_speed_min_fraction);
    s.finish();
  }
  {
    Section s(top.child("presets"), "presets");
    params_from_json(s.child("defensive"), "presets.defensive", c.modes.defensive);
    params_from_json(s.child("hotshot"), "presets.hotshot", c.modes.hotshot);
    params_from_json(s.child("alter"), "presets.alter", w.alter_params);
    s.finish();
  }
  {
    auto& r = w.reward;
    Section s(top.child("reward"), "reward");
    s.get("alpha", r.alpha)
        .get("sigma", r.sigma)
        .get("target_speed", r.target_speed)
        .get("kappa", r.kappa)
        .get("lambda", r.lambda)
        .get("zeta", r.zeta)
        .get("rd_max", r.rd_max)
        .get("neighbor_radius", r.neighbor_radius)
        .get("gamma", r.gamma)
        .get("weight_speed", r.weight_speed)
        .get("weight_defensive", r.weight_defensive)
        .get("weight_collision", r.weight_collision)
        .get("distance_floor", r.distance_floor);
    s.finish();
  }
  {
    Section s(top.child("gatekeeper"), "gatekeeper");
    s.get("n_mc", c.mc.n_mc)
        .get("horizon", c.mc.horizon)
        .get("cadence", c.mc.cadence)
        .get("accel_noise_sigma", c.mc.accel_noise_sigma)
        .get("lane_change_flip_prob", c.mc.lane_change_flip_prob)
        .get("rho_star", c.rho_star)
        .get("neighborhood_radius", c.neighborhood_radius)
        .get("graduation_steps", c.modes.graduation_steps);
    s.finish();
  }
  top.finish();
  w.ego_params = c.world_config().ego_params;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

json record_to_json(const experiment::RunRecord& r) {
  json risk = json::array();
  for (const auto& p : r.risk) {
    risk.push_back({{"step", p.step},
                    {"risk", p.risk},
                    {"averaged_risk", p.averaged_risk},
                    {"energy", p.energy}});
  }
  return {{"world", r.world_index},
          {"seed", r.seed},
          {"termination", std::string(world::to_string(r.termination))},
          {"termination_step", r.termination_step},
          {"r_speed", r.r_speed},
          {"r_defensive", r.r_defensive},
          {"loss", r.loss},
          {"crashed", r.crashed},
          {"defensive_fraction", r.defensive_fraction},
          {"risk", risk},
          {"n_evaluations", r.n_evaluations}};
}

experiment::RunRecord record_from_json(const json& doc) {
  experiment::RunRecord r;
  try {
    r.world_index = doc.at("world").get<int>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.termination = termination_from(doc.at("termination").get<std::string>());
    r.termination_step = doc.at("termination_step").get<int>();
    r.r_speed = doc.at("r_speed").get<std::vector<double>>();
    r.r_defensive = doc.at("r_defensive").get<std::vector<double>>();
    r.loss = doc.at("loss").get<std::vector<double>>();
    r.crashed = doc.at("crashed").get<std::vector<double>>();
    r.defensive_fraction = doc.at("defensive_fraction").get<std::vector<double>>();
    for (const auto& p : doc.at("risk")) {
      r.risk.push_back({p.at("step").get<int>(), p.at("risk").get<double>(),
                        p.at("averaged_risk").get<double>(), p.at("energy").get<double>()});
    }
    r.n_evaluations = doc.at("n_evaluations").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("record: ") + e.what());
  }
  return r;
}

std::vector<experiment::RunRecord> load_records(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("records: cannot open " + path.string());
  std::vector<experiment::RunRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ConfigError("records: " + path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gksim::io
