#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "lfc/error.hpp"
#include "lfc/harness.hpp"
#include "support.hpp"

namespace lfc {
namespace {

const PidGains kGains{0.1, 1.1, 0.25};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Metrics, HandValues) {
  const std::vector<double> f{0.01, -0.02, 0.03};
  const auto m = compute_metrics(f);
  EXPECT_NEAR(m.reward, -0.06, 1e-17);
  EXPECT_NEAR(m.mean_abs_f, 0.02, 1e-17);
  EXPECT_EQ(m.largest_var, 0.03);
  EXPECT_NEAR(m.q_sum, -0.0014, 1e-18);
}

TEST(Metrics, ZeroAndSymmetric) {
  EXPECT_EQ(compute_metrics(std::vector<double>(50, 0.0)), Metrics{});
  const std::vector<double> f{0.01, -0.4, 0.003, 0.2};
  const std::vector<double> g{-0.01, 0.4, -0.003, -0.2};
  EXPECT_EQ(compute_metrics(f), compute_metrics(g));
  const auto m = compute_metrics(f);
  EXPECT_LE(m.q_sum, 0.0);
  EXPECT_GE(m.largest_var, m.mean_abs_f);
}

TEST(RunEpisode, OpenLoopSettlesOnOracle) {
  PlantConfig plant;
  plant.params = test::stable_params();
  plant.sim.horizon = 60.0;
  const Scenario sc{{{{0.0, 0.03}}}, {}};
  const auto traj = run_episode(plant, sc, open_loop_controller());
  ASSERT_EQ(traj.rows.size(), 600u);
  EXPECT_NEAR(traj.rows.back().delta_f, steady_state_freq(0.03, plant.params), 1e-4);
  EXPECT_NEAR(traj.rows.back().t, 60.0, 1e-9);
  EXPECT_NEAR(traj.rows.front().t, 0.1, 1e-12);
}

TEST(RunEpisode, ZeroDisturbanceStaysAtRest) {
  const Scenario quiet{{}, {}};
  for (const auto& c : {pid_controller(kGains), open_loop_controller()}) {
    const auto traj = run_episode(PlantConfig{}, quiet, c);
    for (const auto& r : traj.rows) EXPECT_LE(std::abs(r.delta_f), 1e-9);
  }
}

TEST(RunEpisode, RowsCarryCommandAndDisturbance) {
  const Scenario sc{StepSchedule::benchmark(), {}};
  const auto traj = run_episode(PlantConfig{}, sc, pid_controller(kGains));
  ASSERT_EQ(traj.rows.size(), 200u);
  EXPECT_FALSE(traj.diverged);
  EXPECT_EQ(traj.rows[38].delta_pd, 0.0);   // t = 3.9
  EXPECT_EQ(traj.rows[39].delta_pd, -0.03); // t = 4.0
  EXPECT_EQ(traj.rows[150].delta_pd, 0.03);
  for (const auto& r : traj.rows) EXPECT_LE(std::abs(r.delta_pc), kDefaultActionBound);
}

TEST(RunEpisode, DivergenceGivesPartialTrajectory) {
  const Scenario sc{StepSchedule::benchmark(), {}};
  const auto traj = run_episode(PlantConfig{}, sc, open_loop_controller());
  EXPECT_TRUE(traj.diverged);
  EXPECT_GT(traj.rows.size(), 40u);
  EXPECT_LT(traj.rows.size(), 200u);
}

TEST(Trajectory, BitIdenticalFilesAndMetricsRoundTrip) {
  test::TempDir dir;
  Scenario sc{StepSchedule::benchmark(), {}};
  sc.wind.enabled = true;
  sc.wind.seed = 3;
  PlantConfig plant;
  plant.nl = NonlinearityConfig::benchmark();
  save_trajectory(run_episode(plant, sc, pid_controller(kGains)), dir / "a.csv");
  save_trajectory(run_episode(plant, sc, pid_controller(kGains)), dir / "b.csv");
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.csv").substr(0, 46), "t,delta_f,delta_pm,delta_pg,delta_pc,delta_pd\n");

  const auto original = run_episode(plant, sc, pid_controller(kGains));
  const auto loaded = load_trajectory(dir / "a.csv");
  EXPECT_EQ(compute_metrics(loaded), compute_metrics(original));
  ASSERT_EQ(loaded.rows.size(), original.rows.size());
  for (std::size_t i = 0; i < loaded.rows.size(); ++i) {
    EXPECT_EQ(loaded.rows[i].delta_pm, original.rows[i].delta_pm);
  }
  std::ofstream(dir / "bad.csv") << "t,delta_f\n1,2\n";
  EXPECT_THROW(load_trajectory(dir / "bad.csv"), ParseError);
}

TEST(Compare, SameControllerTwiceGivesIdenticalRows) {
  Scenario sc{StepSchedule::benchmark(), {}};
  sc.wind.enabled = true;
  const auto rows = compare(PlantConfig{}, sc, {{"a", pid_controller(kGains)}, {"b", pid_controller(kGains)}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].metrics, rows[1].metrics);
}

TEST(Compare, OpenLoopWorseThanStabilizingController) {
  PlantConfig plant;
  plant.params = test::stable_params();
  const Scenario sc{StepSchedule::benchmark(), {}};
  const auto rows = compare(plant, sc, {{"open-loop", open_loop_controller()}, {"pid", pid_controller(kGains)}});
  EXPECT_GT(rows[0].metrics.mean_abs_f, rows[1].metrics.mean_abs_f);
  EXPECT_THROW(compare(plant, sc, {{"pid", pid_controller(kGains)}}), ConfigError);
}

TEST(Compare, SharedDisturbanceSequence) {
  Scenario sc{StepSchedule::benchmark(), {}};
  sc.wind.enabled = true;
  sc.wind.seed = 12;
  PlantConfig plant;
  plant.params = test::stable_params();
  const auto a = run_episode(plant, sc, open_loop_controller());
  const auto b = run_episode(plant, sc, pid_controller(kGains));
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].delta_pd, b.rows[i].delta_pd);
}

TEST(Compare, ErrorsBecomeRowFlags) {
  const Controller broken = [](const Observation&) -> double { throw NonFiniteError("boom"); };
  const auto rows = compare(PlantConfig{}, Scenario{}, {{"pid", pid_controller(kGains)}, {"bad", broken}});
  EXPECT_TRUE(rows[0].error.empty());
  EXPECT_EQ(rows[1].error, "boom");
  const auto j = comparison_json(rows);
  EXPECT_EQ(j["bad"]["error"], "boom");
  EXPECT_TRUE(j["pid"].contains("q_sum"));
  EXPECT_TRUE(j["pid"].contains("mean_abs_f"));
  EXPECT_TRUE(j["pid"].contains("largest_var"));
  EXPECT_TRUE(j["pid"].contains("reward"));
}

TEST(Config, ParsesTypedValues) {
  const auto c = Config::parse(
      "# comment\n"
      "a.x = 0.25  # trailing\n"
      "a.n = 12\n"
      "a.flag = true\n"
      "a.list = 0.1:0.5:0.1\n"
      "a.ints = 256, 256\n"
      "a.pairs = (4, -0.03), (12, 0.03)\n"
      "a.none = none\n"
      "a.inf = inf\n");
  EXPECT_EQ(c.get_double("a.x", 0), 0.25);
  EXPECT_EQ(c.get_int("a.n", 0), 12);
  EXPECT_TRUE(c.get_bool("a.flag", false));
  const auto l = c.get_list("a.list", {});
  ASSERT_EQ(l.size(), 5u);
  EXPECT_DOUBLE_EQ(l[2], 0.3);
  EXPECT_DOUBLE_EQ(l.back(), 0.5);
  EXPECT_EQ(c.get_int_list("a.ints", {}), (std::vector<int>{256, 256}));
  const auto p = c.get_pairs("a.pairs", {});
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[1], (std::pair<double, double>{12, 0.03}));
  EXPECT_TRUE(c.get_pairs("a.none", {{1, 1}}).empty());
  EXPECT_TRUE(std::isinf(c.get_double("a.inf", 0)));
  EXPECT_EQ(c.get_double("missing", 7.5), 7.5);
}

TEST(Config, ErrorsNameTheKey) {
  const auto c = Config::parse("plant.h = abc\nsim.dt = 0.01\n");
  try {
    c.get_double("plant.h", 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("plant.h"), std::string::npos);
  }
  EXPECT_THROW(Config::parse("no equals sign"), ConfigError);
  auto d = Config::parse("");
  EXPECT_THROW(d.apply_override("novalue"), ConfigError);
  d.apply_override("train.episodes=5");
  EXPECT_EQ(d.get_int("train.episodes", 0), 5);
  try {
    Settings::from_config(Config::parse("plant.tg = 0.1\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("plant.tg"), std::string::npos);
  }
}

TEST(Settings, ShippedConfigsLoad) {
  for (const char* name : {"linear.conf", "nonlinear.conf"}) {
    const auto s = Settings::from_config(Config::load(std::filesystem::path(LFC_SOURCE_DIR) / "configs" / name));
    EXPECT_EQ(s.plant.params.r_droop, 0.33);
    EXPECT_EQ(s.scenario.steps, StepSchedule::benchmark());
    EXPECT_EQ(s.train.episodes, 100);
    EXPECT_EQ(s.train.buffer_capacity, 8000u);
    EXPECT_EQ(s.train.learning_rate, 0.0005);
    EXPECT_EQ(s.train.zoo.epsilon, 1e-4);
  }
  const auto nl = Settings::from_config(
      Config::load(std::filesystem::path(LFC_SOURCE_DIR) / "configs" / "nonlinear.conf"));
  EXPECT_EQ(nl.plant.nl.gdb_kappa, 0.0006);
  EXPECT_EQ(nl.plant.nl.grc_sigma, 0.0017);
}

TEST(Settings, Overrides) {
  auto c = Config::parse("pid.kp = 0.5\nzoo.sampling = iid\ncompare.controllers = pid, open-loop\n");
  const auto s = Settings::from_config(c);
  ASSERT_TRUE(s.pid_gains.has_value());
  EXPECT_EQ(*s.pid_gains, (PidGains{0.5, 0, 0}));
  EXPECT_EQ(s.train.zoo.sampling, ZooSampling::kIid);
  EXPECT_EQ(s.compare_controllers, (std::vector<std::string>{"pid", "open-loop"}));
  c.set("zoo.sampling", "sobol");
  EXPECT_THROW(Settings::from_config(c), ConfigError);
  EXPECT_THROW(Settings::from_config(Config::parse("sim.horizon = 20.05\n")), ConfigError);
}

TEST(Workspace, MissingArtifactsNameThePath) {
  test::TempDir dir;
  Settings s;
  s.output_dir = dir.path();
  s.controller = "actor";
  Workspace ws(s);
  try {
    ws.evaluate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find((dir / "actor.mlp").string()), std::string::npos) << e.what();
  }
  EXPECT_THROW(ws.gains(), ConfigError);
  EXPECT_THROW(ws.train_emulator(), ConfigError);
}

}  // namespace
}  // namespace lfc
