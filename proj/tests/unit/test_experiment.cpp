#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gksim/config_io.hpp"
#include "gksim/errors.hpp"
#include "gksim/experiment.hpp"

namespace ex = gksim::experiment;
namespace io = gksim::io;
namespace fs = std::filesystem;

namespace {

constexpr double kZ90 = 1.6448536269514722;

ex::ExperimentConfig tiny(int n_worlds = 3, int n_steps = 12) {
  auto c = ex::default_config();
  c.n_worlds = n_worlds;
  c.world.n_steps = n_steps;
  c.mc.n_mc = 4;
  c.base_seed = 500;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = fs::temp_directory_path() / "gksim_tests" /
             (std::string(info->test_suite_name()) + "_" + info->name()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

ex::RunRecord record(std::vector<double> loss, std::vector<double> crashed = {}) {
  ex::RunRecord r;
  r.loss = loss;
  r.r_speed = loss;
  r.r_defensive = loss;
  r.defensive_fraction.assign(loss.size(), 0.0);
  r.crashed = crashed.empty() ? std::vector<double>(loss.size(), 0.0) : crashed;
  r.termination_step = static_cast<int>(loss.size());
  return r;
}

}  // namespace

// --- Batches ---------------------------------------------------------------------

TEST(RunBatch, DeterministicAcrossRepeatsAndWorkers) {
  const auto c = tiny(3, 12);
  const auto a = ex::run_batch(c, {.workers = 1});
  const auto b = ex::run_batch(c, {.workers = 3});
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(io::record_to_json(a[i]).dump(), io::record_to_json(b[i]).dump()) << i;
    EXPECT_EQ(a[i].seed, 500u + i);
  }
}

TEST(RunBatch, SingleStepSmoke) {
  const auto r = ex::run_batch(tiny(1, 1));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].termination_step, 1);
  EXPECT_EQ(r[0].loss.size(), 1u);
  EXPECT_EQ(r[0].n_evaluations, 1);  // evaluation happens at step 0
}

TEST(RunBatch, StaticBaselinesNeverEvaluate) {
  for (auto policy : {ex::BaselinePolicy::Defensive, ex::BaselinePolicy::Hotshot}) {
    auto c = tiny(2, 15);
    c.n_online = 0;
    c.baseline_policy = policy;
    for (const auto& r : ex::run_batch(c)) {
      EXPECT_EQ(r.n_evaluations, 0);
      EXPECT_TRUE(r.risk.empty());
      const double want = policy == ex::BaselinePolicy::Defensive ? 1.0 : 0.0;
      for (double f : r.defensive_fraction) EXPECT_EQ(f, want);
    }
  }
}

TEST(RunBatch, ObserveOnlyEvaluatesButNeverSwitches) {
  auto c = tiny(2, 15);
  c.observe_only = true;
  c.rho_star = 1e-6;  // any positive risk would otherwise switch
  for (const auto& r : ex::run_batch(c)) {
    EXPECT_GT(r.n_evaluations, 0);
    for (double f : r.defensive_fraction) EXPECT_EQ(f, 0.0);
  }
}

TEST(RunBatch, BaselineWithOnlineEgosRejected) {
  auto c = tiny();
  c.baseline_policy = ex::BaselinePolicy::Hotshot;
  EXPECT_THROW(c.validate(), gksim::ConfigError);
}

// --- Aggregation -------------------------------------------------------------------

TEST(Aggregate, IdenticalRecordsGiveZeroWidthInterval) {
  const auto s = ex::aggregate({record({0.5, -1.0}), record({0.5, -1.0}), record({0.5, -1.0})});
  const auto* loss = s.find(ex::kQuantityLoss);
  ASSERT_NE(loss, nullptr);
  for (const auto& p : loss->points) {
    EXPECT_EQ(p.lo90, p.mean);
    EXPECT_EQ(p.hi90, p.mean);
    EXPECT_EQ(p.n, 3);
  }
}

TEST(Aggregate, TwoWorldNormalInterval) {
  const auto s = ex::aggregate({record({1.0}), record({3.0})});
  const auto& p = s.find(ex::kQuantityLoss)->points.at(0);
  EXPECT_EQ(p.mean, 2.0);
  // sd = sqrt(2), half width = z sd / sqrt(2) = z.
  EXPECT_NEAR(p.hi90 - p.mean, kZ90, 1e-12);
  EXPECT_NEAR(p.mean - p.lo90, kZ90, 1e-12);
}

TEST(Aggregate, CrashCurveCarriesTerminatedWorlds) {
  std::vector<double> crashed(11, 0.0);
  crashed[10] = 1.0;
  std::vector<ex::RunRecord> recs{record(std::vector<double>(11, 0.0), crashed)};
  for (int k = 0; k < 3; ++k) recs.push_back(record(std::vector<double>(20, 0.0)));
  const auto s = ex::aggregate(recs);
  ASSERT_EQ(s.crash_curve.size(), 20u);
  for (int t = 0; t < 10; ++t) EXPECT_EQ(s.crash_curve[t], 0.0) << t;
  for (int t = 10; t < 20; ++t) EXPECT_EQ(s.crash_curve[t], 0.25) << t;
  // Other quantities average over worlds still running.
  EXPECT_EQ(s.find(ex::kQuantityLoss)->points.at(15).n, 3);
  EXPECT_EQ(s.find(ex::kQuantityCrashed)->points.at(15).n, 4);
}

TEST(Aggregate, EmptyInputThrows) {
  EXPECT_THROW((void)ex::aggregate({}), gksim::DomainError);
}

TEST(Aggregate, IntervalsOrderedAndCrashCurveMonotone) {
  auto c = tiny(6, 30);
  c.n_online = 0;
  c.baseline_policy = ex::BaselinePolicy::Hotshot;
  for (auto method : {ex::CiMethod::Normal, ex::CiMethod::Bootstrap}) {
    const auto s = ex::aggregate(ex::run_batch(c), method);
    for (const auto& q : s.series) {
      for (const auto& p : q.points) {
        EXPECT_LE(p.lo90, p.mean) << q.name;
        EXPECT_LE(p.mean, p.hi90) << q.name;
      }
    }
    for (std::size_t t = 1; t < s.crash_curve.size(); ++t) {
      EXPECT_GE(s.crash_curve[t], s.crash_curve[t - 1]);
    }
  }
}

TEST(Aggregate, BootstrapIsDeterministic) {
  std::vector<ex::RunRecord> recs;
  for (int k = 0; k < 7; ++k) recs.push_back(record({k * 0.3, 1.0 - k * 0.1}));
  const auto a = ex::timeseries_csv(ex::aggregate(recs, ex::CiMethod::Bootstrap));
  const auto b = ex::timeseries_csv(ex::aggregate(recs, ex::CiMethod::Bootstrap));
  EXPECT_EQ(a, b);
}

TEST(TimeseriesCsv, EmptyStatsIsHeaderOnly) {
  EXPECT_EQ(ex::timeseries_csv({}), "step,quantity,mean,lo90,hi90,n\n");
}

TEST(TimeseriesCsv, OnlineRunHasEveryQuantity) {
  const auto s = ex::aggregate(ex::run_batch(tiny(2, 12)));
  std::set<std::string> names;
  for (const auto& q : s.series) names.insert(q.name);
  const std::set<std::string> want{"R_D", "R_S", "Loss", "Crashed", "Fraction Defensive",
                                   "E[Energy]", "Risk"};
  EXPECT_EQ(names, want);
  // Risk only at evaluation steps.
  for (const auto& p : s.find(ex::kQuantityRisk)->points) EXPECT_EQ(p.step % 5, 0);
}

// --- Emission --------------------------------------------------------------------

TEST(Emit, ByteIdenticalOnRerun) {
  const auto c = tiny(2, 10);
  const ex::RunOptions opts{.workers = 2, .dump_trajectories = true, .dump_risk = true};
  const auto d1 = scratch("a");
  const auto d2 = scratch("b");
  {
    const auto r = ex::run_batch(c, opts);
    ex::emit(ex::aggregate(r), r, c, d1);
  }
  {
    const auto r = ex::run_batch(c, opts);
    ex::emit(ex::aggregate(r), r, c, d2);
  }
  for (const char* name :
       {"summary.json", "timeseries.csv", "runs.jsonl", "trajectories.jsonl", "risk.jsonl"}) {
    ASSERT_TRUE(fs::exists(d1 / name)) << name;
    EXPECT_EQ(slurp(d1 / name), slurp(d2 / name)) << name;
  }
}

TEST(Emit, RecordsRoundTripThroughJsonl) {
  const auto c = tiny(2, 10);
  const auto dir = scratch("out");
  const auto r = ex::run_batch(c);
  ex::emit(ex::aggregate(r), r, c, dir);
  const auto back = io::load_records(dir / "runs.jsonl");
  ASSERT_EQ(back.size(), r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(io::record_to_json(back[i]).dump(), io::record_to_json(r[i]).dump());
  }
  EXPECT_EQ(ex::timeseries_csv(ex::aggregate(back)), slurp(dir / "timeseries.csv"));
}

// --- Config documents ---------------------------------------------------------------

TEST(ConfigJson, RoundTrip) {
  auto c = ex::default_config();
  c.n_worlds = 17;
  c.mc.n_mc = 9;
  c.rho_star = 3.5;
  c.ci_method = ex::CiMethod::Bootstrap;
  c.world.reward.gamma = 0.9;
  c.modes.defensive.time_headway = 2.5;
  const auto doc = io::config_to_json(c);
  EXPECT_EQ(io::config_to_json(io::config_from_json(doc)), doc);
}

TEST(ConfigJson, EmptyDocumentIsDefault) {
  EXPECT_EQ(io::config_to_json(io::config_from_json(nlohmann::json::object())),
            io::config_to_json(ex::default_config()));
}

TEST(ConfigJson, ShippedDefaultMatchesCode) {
  const auto shipped = io::load_config(fs::path(GKSIM_SOURCE_DIR) / "configs" / "default.json");
  EXPECT_EQ(io::config_to_json(shipped), io::config_to_json(ex::default_config()));
}

TEST(ConfigJson, RejectsUnknownKeysBadTypesAndBadValues) {
  using nlohmann::json;
  EXPECT_THROW((void)io::config_from_json(json{{"worlds", 3}}), gksim::ConfigError);
  EXPECT_THROW((void)io::config_from_json(json{{"reward", {{"sigmaa", 1.0}}}}),
               gksim::ConfigError);
  EXPECT_THROW((void)io::config_from_json(json{{"experiment", {{"n_worlds", "many"}}}}),
               gksim::ConfigError);
  EXPECT_THROW((void)io::config_from_json(json{{"reward", {{"sigma", -1.0}}}}),
               gksim::ConfigError);
  EXPECT_THROW((void)io::config_from_json(json{{"world", {{"ring_length", 50.0}}}}),
               gksim::ConfigError);
  EXPECT_THROW((void)io::config_from_json(json{{"experiment", {{"ci_method", "t"}}}}),
               gksim::ConfigError);
  EXPECT_THROW((void)io::config_from_json(json::array()), gksim::ConfigError);
}

// --- Command line -------------------------------------------------------------------

namespace {

int run_cli(const std::string& args) {
  const char* cli = std::getenv("GKSIM_CLI");
  const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  if (std::getenv("GKSIM_CLI") == nullptr) GTEST_SKIP() << "GKSIM_CLI not set";
  const auto dir = scratch("cli");
  write_file(dir / "ok.json",
             R"({"experiment": {"n_worlds": 2, "n_steps": 4}, "gatekeeper": {"n_mc": 2}})");
  write_file(dir / "unknown.json", R"({"experiment": {"n_wrlds": 2}})");
  write_file(dir / "invalid.json", R"({"gatekeeper": {"n_mc": 0}})");
  write_file(dir / "broken.json", R"({"experiment": )");
  write_file(dir / "blocker", "not a directory");

  const auto ok = (dir / "ok.json").string();
  EXPECT_EQ(run_cli("run --config " + ok + " --workers 1 --out " + (dir / "run").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "run" / "timeseries.csv"));
  EXPECT_EQ(run_cli("baseline --policy hotshot --config " + ok + " --out " +
                    (dir / "base").string()),
            0);
  EXPECT_EQ(run_cli("aggregate --in " + (dir / "run").string() + " --out " +
                    (dir / "again").string()),
            0);
  EXPECT_EQ(slurp(dir / "run" / "timeseries.csv"), slurp(dir / "again" / "timeseries.csv"));
  EXPECT_EQ(run_cli("validate-config " + ok), 0);

  EXPECT_EQ(run_cli("validate-config " + (dir / "unknown.json").string()), 1);
  EXPECT_EQ(run_cli("validate-config " + (dir / "invalid.json").string()), 1);
  EXPECT_EQ(run_cli("validate-config " + (dir / "broken.json").string()), 1);
  EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(run_cli("baseline --policy reckless --config " + ok), 1);
  EXPECT_EQ(run_cli(""), 1);

  // Output path below a regular file cannot be created.
  EXPECT_EQ(run_cli("run --config " + ok + " --out " + (dir / "blocker" / "x").string()), 2);
}
