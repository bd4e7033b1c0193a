// streamcl: train an autoencoder against a streamed synthetic field with a
// selectable continual-learning strategy, compare strategies, or re-evaluate
// a checkpoint.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "streamcl/config.hpp"
#include "streamcl/errors.hpp"
#include "streamcl/metrics.hpp"
#include "streamcl/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitTransport = 4;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int exit_code(streamcl::RunStatus status) {
  switch (status) {
    case streamcl::RunStatus::Ok: return kExitOk;
    case streamcl::RunStatus::Aborted: return kExitTransport;
    case streamcl::RunStatus::NumericFailure: return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streamcl: continual learning on streamed simulation fields"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool plots = false;
  std::string strategies_arg = "naive,ewc,agem,latent-layerwise";
  std::string seeds_arg = "0,1,2";
  std::string checkpoint_path;

  auto* run = app.add_subcommand("run", "Run one streaming training experiment");
  run->add_option("--config", config_path, "Config file (key = value)")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the run seed");
  run->add_flag("--plots", plots, "Write reconstruction grid images");
  run->add_option("--out", out_dir, "Output directory");

  auto* compare = app.add_subcommand("compare", "Compare strategies over seeds on one stream");
  compare->add_option("--config", config_path, "Config file (key = value)")->required();
  compare->add_option("--strategies", strategies_arg, "Comma-separated strategy names");
  compare->add_option("--seeds", seeds_arg, "Comma-separated seeds");
  compare->add_flag("--plots", plots, "Write reconstruction grid images");
  compare->add_option("--out", out_dir, "Output directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the configured stream");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval->add_option("--config", config_path, "Config file (key = value)")->required();
  eval->add_option("--out", out_dir, "Directory for tasks.csv and summary.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    streamcl::RunConfig cfg = streamcl::load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (plots) cfg.plots = true;

    if (*run) {
      if (*seed_opt) cfg.seed = seed;
      const auto result = streamcl::run_experiment(cfg);
      std::cout << streamcl::per_task_csv(result.report) << '\n' << streamcl::summary_csv(result.report);
      std::cout << "status: " << streamcl::to_string(result.status) << '\n';
      if (!result.message.empty()) std::cerr << "error: " << result.message << '\n';
      return exit_code(result.status);
    }

    if (*compare) {
      std::vector<streamcl::Strategy> strategies;
      for (const auto& name : split_csv(strategies_arg)) strategies.push_back(streamcl::Strategy::parse(name));
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_csv(seeds_arg)) {
        try {
          seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
          throw streamcl::ConfigError("invalid seed '" + s + "'");
        }
      }
      const auto cmp = streamcl::compare_strategies(cfg, strategies, seeds);
      std::cout << cmp.csv();
      for (const auto& r : cmp.runs) {
        if (r.status != streamcl::RunStatus::Ok) return exit_code(r.status);
      }
      return kExitOk;
    }

    if (*eval) {
      const auto report = streamcl::evaluate_checkpoint(cfg, checkpoint_path);
      std::cout << streamcl::per_task_csv(report) << '\n' << streamcl::summary_csv(report);
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(std::filesystem::path(out_dir) / "tasks.csv") << streamcl::per_task_csv(report);
        std::ofstream(std::filesystem::path(out_dir) / "summary.csv") << streamcl::summary_csv(report);
      }
      return kExitOk;
    }
  } catch (const streamcl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const streamcl::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const streamcl::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const streamcl::TransportError& e) {
    std::cerr << "transport failure: " << e.what() << '\n';
    return kExitTransport;
  }
  return kExitOk;
}
