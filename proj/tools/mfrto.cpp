// mfrto: Monte-Carlo driver for trust-region multi-fidelity RTO.
//
//   mfrto run --config cfg.json [--seed N] [--scenario s] [--replicates R]
//             [--iterations K] [--out DIR]
//   mfrto motivate [--seed N] [--out DIR]
//   mfrto compare DIR [DIR ...] [--out DIR]

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfrto/campaign.hpp"

namespace {

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scenario;
  std::optional<int> replicates;
  std::optional<int> iterations;
  std::optional<int> jobs;
  std::optional<std::string> out;
};

int cmd_run(const RunArgs& args) {
  mfrto::CampaignConfig config;
  try {
    config = mfrto::load_campaign_config(args.config);
    if (args.seed) config.seed = *args.seed;
    if (args.scenario) config.scenario = mfrto::parse_scenario(*args.scenario);
    if (args.replicates) config.replicates = *args.replicates;
    if (args.iterations) config.rto.max_iterations = *args.iterations;
    if (args.jobs) config.jobs = *args.jobs;
    if (args.out) config.output_dir = *args.out;
    config.finalize();
    (void)mfrto::make_problem(config);
  } catch (const mfrto::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mfrto::kExitConfig;
  } catch (const mfrto::OutOfRange& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mfrto::kExitConfig;
  }

  try {
    const auto result = mfrto::run_campaign(config);
    const int code = mfrto::write_campaign(result, config.output_dir);
    std::cerr << "wrote " << (config.output_dir / "results.csv").string() << " and summary.json\n";
    return code;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return mfrto::kExitRuntime;
  }
}

int cmd_motivate(std::uint64_t seed, const std::string& out_dir) {
  try {
    mfrto::MotivateOptions opts;
    opts.seed = seed;
    const auto result = mfrto::motivate(opts);
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(std::filesystem::path(out_dir) / "bands.csv", std::ios::binary);
    mfrto::write_bands_csv(result, csv);
    int escapes = 0;
    for (const bool e : result.escapes_widest) escapes += e ? 1 : 0;
    std::cout << "grid points outside the widest band: " << escapes << " of "
              << result.grid.size() << '\n';
    return mfrto::kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return mfrto::kExitRuntime;
  }
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out_dir) {
  std::vector<mfrto::CampaignData> data;
  try {
    for (const auto& d : dirs) data.push_back(mfrto::read_campaign_dir(d));
  } catch (const mfrto::SchemaMismatch& e) {
    std::cerr << "schema mismatch: " << e.what() << '\n';
    return mfrto::kExitConfig;
  }
  try {
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(std::filesystem::path(out_dir) / "comparison.csv", std::ios::binary);
    mfrto::write_comparison_csv(data, csv);
    std::ofstream js(std::filesystem::path(out_dir) / "comparison.json", std::ios::binary);
    js << mfrto::comparison_summary(data).dump(2) << '\n';
    return mfrto::kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return mfrto::kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust-region multi-fidelity real-time optimization experiments"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a Monte-Carlo campaign");
  run_cmd->add_option("--config", run.config, "Campaign JSON file")->required();
  run_cmd->add_option("--seed", run.seed, "Master seed override");
  run_cmd->add_option("--scenario", run.scenario, "proposed | a | b | c");
  run_cmd->add_option("--replicates", run.replicates, "Replicate count override");
  run_cmd->add_option("--iterations", run.iterations, "RTO iteration count override");
  run_cmd->add_option("--jobs", run.jobs, "Worker threads");
  run_cmd->add_option("--out", run.out, "Output directory override");

  std::uint64_t motivate_seed = mfrto::MotivateOptions{}.seed;
  std::string motivate_out = "results/motivate";
  auto* mot_cmd = app.add_subcommand("motivate", "Write x sin(x) band data");
  mot_cmd->add_option("--seed", motivate_seed, "Noise seed");
  mot_cmd->add_option("--out", motivate_out, "Output directory");

  std::vector<std::string> compare_dirs;
  std::string compare_out = "results/compare";
  auto* cmp_cmd = app.add_subcommand("compare", "Merge campaign result directories");
  cmp_cmd->add_option("dirs", compare_dirs, "Campaign result directories")->required();
  cmp_cmd->add_option("--out", compare_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? mfrto::kExitOk : mfrto::kExitConfig;
  }

  if (*run_cmd) return cmd_run(run);
  if (*mot_cmd) return cmd_motivate(motivate_seed, motivate_out);
  return cmd_compare(compare_dirs, compare_out);
}
