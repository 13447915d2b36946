// lfc: command-line front end for the load frequency control experiments.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lfc/allocator.hpp"
#include "lfc/error.hpp"
#include "lfc/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void print_rows(const std::vector<lfc::ComparisonRow>& rows) {
  std::printf("%-12s %14s %12s %12s %12s\n", "controller", "q_sum", "mean|f|", "max|f|", "reward");
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      std::printf("%-12s error: %s\n", r.name.c_str(), r.error.c_str());
      continue;
    }
    std::printf("%-12s %14.6g %12.6g %12.6g %12.6g%s\n", r.name.c_str(), r.metrics.q_sum,
                r.metrics.mean_abs_f, r.metrics.largest_var, r.metrics.reward,
                r.diverged ? "  (diverged)" : "");
  }
}

int run(const std::string& command, const Options& opt) {
  lfc::Config config = opt.config_path.empty() ? lfc::Config{} : lfc::Config::load(opt.config_path);
  for (const auto& kv : opt.overrides) config.apply_override(kv);
  const auto settings = lfc::Settings::from_config(config);
  lfc::Workspace ws(settings, [&](const std::string& msg) {
    if (!opt.quiet) std::cerr << "[lfc] " << msg << '\n';
  });

  if (command == "tune-pid") {
    const auto res = ws.tune_pid();
    std::printf("kp=%g ki=%g kd=%g cost=%.6g (%d evaluated, %d diverged)\n", res.gains.kp,
                res.gains.ki, res.gains.kd, res.cost, res.evaluated, res.diverged);
  } else if (command == "gen-db") {
    const auto db = ws.generate_database();
    std::printf("%zu records written to %s\n", db.size(), ws.path("database.csv").c_str());
  } else if (command == "train-emulator") {
    const auto fit = ws.train_emulator();
    std::printf("validation rmse %.6g Hz (%.2f%% of target rms), best epoch %d\n",
                fit.log.validation_rmse,
                100.0 * fit.log.validation_rmse / fit.log.validation_target_rms,
                fit.log.best_epoch + 1);
  } else if (command == "pretrain-actor") {
    ws.pretrain_actor();
    std::printf("actor written to %s\n", ws.path("pid_actor.mlp").c_str());
  } else if (command == "train") {
    const auto res = ws.train();
    for (const auto& e : res.log) {
      std::printf("episode %3d reward %.6g mean|f| %.6g%s\n", e.episode, e.metrics.reward,
                  e.metrics.mean_abs_f, e.diverged ? " diverged" : "");
    }
  } else if (command == "evaluate") {
    const auto traj = ws.evaluate();
    const auto m = lfc::compute_metrics(traj);
    std::printf("%s: q_sum %.6g mean|f| %.6g max|f| %.6g reward %.6g%s\n",
                settings.controller.c_str(), m.q_sum, m.mean_abs_f, m.largest_var, m.reward,
                traj.diverged ? " (diverged)" : "");
    if (traj.diverged) return kRuntime;
  } else if (command == "compare") {
    print_rows(ws.compare());
  } else if (command == "plot-data") {
    ws.plot_data();
    std::printf("figure data written to %s\n", ws.path("figures").c_str());
  } else if (command == "pipeline") {
    print_rows(ws.run_pipeline());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  lfc::keep_heap_resident();
  CLI::App app{"Load frequency control with a model-free DDPG actor"};
  app.require_subcommand(1);
  Options opt;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"tune-pid", "grid-search PID gains on the tuning scenario"},
      {"gen-db", "simulate noisy PID episodes into the LFC database"},
      {"train-emulator", "fit the one-step frequency emulator"},
      {"pretrain-actor", "clone the PID controller into the actor"},
      {"train", "run the DDPG loop with zeroth-order policy gradients"},
      {"evaluate", "simulate one controller and write its trajectory and metrics"},
      {"compare", "run several controllers on the same scenario"},
      {"plot-data", "write figure CSVs"},
      {"pipeline", "tune-pid through compare in one go"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", opt.config_path, "config file (key = value lines)")
        ->check(CLI::ExistingFile);
    sub->add_option("-s,--set", opt.overrides, "override a config key, e.g. train.episodes=20");
    sub->add_flag("-q,--quiet", opt.quiet, "no progress messages");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opt);
  } catch (const lfc::ConfigError& e) {
    std::cerr << "lfc: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const lfc::ParseError& e) {
    std::cerr << "lfc: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "lfc: " << command << " aborted: " << e.what() << '\n';
    return kRuntime;
  }
}
