// Command-line front end for batch experiments.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gksim/config_io.hpp"
#include "gksim/errors.hpp"
#include "gksim/experiment.hpp"

namespace {

namespace fs = std::filesystem;
namespace ex = gksim::experiment;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  bool dump_trajectories = false;
  bool dump_risk = false;
  std::string out;
};

void add_run_flags(CLI::App& cmd, RunArgs& args) {
  cmd.add_option("--config", args.config, "JSON config file")->required()->check(CLI::ExistingFile);
  cmd.add_option("--seed", args.seed, "Base seed (overrides config)");
  cmd.add_option("--workers", args.workers, "Worker threads, 0 = all cores")
      ->check(CLI::NonNegativeNumber);
  cmd.add_flag("--dump-trajectories", args.dump_trajectories, "Write trajectories.jsonl");
  cmd.add_flag("--dump-risk", args.dump_risk, "Write risk.jsonl");
  cmd.add_option("--out", args.out, "Output directory (overrides config)");
}

int execute(ex::ExperimentConfig config, const RunArgs& args) {
  if (args.seed) config.base_seed = *args.seed;
  if (!args.out.empty()) config.output_dir = args.out;
  config.validate();

  ex::RunOptions options;
  options.workers = args.workers;
  options.dump_trajectories = args.dump_trajectories;
  options.dump_risk = args.dump_risk;

  const auto records = ex::run_batch(config, options);
  const auto stats = ex::aggregate(records, config.ci_method);
  ex::emit(stats, records, config, config.output_dir);

  int crashes = 0;
  for (const auto& r : records) {
    if (r.termination == gksim::world::TerminationReason::TrackedCrash) ++crashes;
  }
  std::cout << "worlds=" << records.size() << " tracked_crashes=" << crashes
            << " output=" << config.output_dir << '\n';
  return kExitOk;
}

int aggregate_dir(const fs::path& in, const fs::path& out) {
  const fs::path runs = in / "runs.jsonl";
  if (!fs::exists(runs)) throw gksim::ConfigError("aggregate: missing " + runs.string());
  ex::ExperimentConfig config = ex::default_config();
  const fs::path summary = in / "summary.json";
  if (fs::exists(summary)) {
    std::ifstream f(summary);
    const auto doc = nlohmann::json::parse(f, nullptr, false);
    if (doc.is_discarded() || !doc.contains("config")) {
      throw gksim::ConfigError("aggregate: malformed " + summary.string());
    }
    config = gksim::io::config_from_json(doc.at("config"));
  }
  const auto records = gksim::io::load_records(runs);
  const auto stats = ex::aggregate(records, config.ci_method);
  ex::emit(stats, records, config, out);
  std::cout << "aggregated " << records.size() << " runs into " << out.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent highway simulator with risk-monitoring gatekeepers"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a batch from a config file");
  add_run_flags(*run, run_args);

  RunArgs base_args;
  std::string policy;
  auto* baseline = app.add_subcommand("baseline", "Run a static-policy baseline batch");
  baseline->add_option("--policy", policy, "defensive or hotshot")
      ->required()
      ->check(CLI::IsMember({"defensive", "hotshot"}));
  add_run_flags(*baseline, base_args);

  std::string agg_in;
  std::string agg_out;
  auto* agg = app.add_subcommand("aggregate", "Re-aggregate runs.jsonl from a previous run");
  agg->add_option("--in", agg_in, "Directory holding runs.jsonl")->required();
  agg->add_option("--out", agg_out, "Output directory")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate-config", "Check a config file and print it");
  validate->add_option("file", validate_path, "JSON config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      return execute(gksim::io::load_config(run_args.config), run_args);
    }
    if (*baseline) {
      auto config = gksim::io::load_config(base_args.config);
      config.baseline_policy =
          policy == "defensive" ? ex::BaselinePolicy::Defensive : ex::BaselinePolicy::Hotshot;
      config.n_online = 0;
      config.observe_only = false;
      return execute(std::move(config), base_args);
    }
    if (*agg) {
      return aggregate_dir(agg_in, agg_out);
    }
    if (*validate) {
      const auto config = gksim::io::load_config(validate_path);
      std::cout << gksim::io::config_to_json(config).dump(2) << '\n';
      return kExitOk;
    }
  } catch (const gksim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
