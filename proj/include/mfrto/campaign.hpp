#pragma once

// Monte-Carlo campaigns over RTO scenarios, the x sin(x) band data and
// cross-scenario comparison. Backs the `mfrto` command-line tool.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mfrto/plant_models.hpp"
#include "mfrto/rto.hpp"

namespace mfrto {

enum class ProblemKind { Pbr, Synthetic, Xsinx };
enum class Scenario { Proposed, A, B, C };

ProblemKind parse_problem(std::string_view name);
std::string_view to_string(ProblemKind kind);
Scenario parse_scenario(std::string_view name);
std::string_view to_string(Scenario scenario);

/// a: expectation constraints with trust region; b: chance constraints
/// without trust region; c: chance constraints and trust region, no model.
ScenarioFlags flags_for(Scenario scenario);

struct CampaignConfig {
  ProblemKind problem = ProblemKind::Pbr;
  Scenario scenario = Scenario::Proposed;
  int replicates = 10;
  std::uint64_t seed = 1;
  int n_initial = 13;
  int initial_attempts = 5000;
  double alpha = 0.1;
  std::optional<double> multiplier_override;
  RtoConfig rto;
  NoiseSpec noise;
  bool end_nitrate_constraint = false;
  std::filesystem::path pbr_parameters = "data/pbr_parameters.json";
  double synthetic_mismatch = 1.0;
  double synthetic_noise = 0.0;
  std::filesystem::path output_dir = "results";
  int jobs = 1;

  /// Re-derives scenario flags and the risk spec from the plain fields.
  void finalize();
  nlohmann::json to_json() const;
};

/// Parses a JSON campaign description; unknown keys are ConfigErrors.
/// Relative paths resolve against `base_dir`.
CampaignConfig parse_campaign_config(std::string_view json_text,
                                     const std::filesystem::path& base_dir = ".");
CampaignConfig load_campaign_config(const std::filesystem::path& path);

RtoProblem make_problem(const CampaignConfig& config);

/// Stream for one replicate, derived only from the master seed.
Rng replicate_rng(std::uint64_t master_seed, int replicate);

/// Uniform rejection sampling screened by the model's constraints; plant
/// measurements are taken at accepted points. After `max_attempts` draws the
/// least violating candidates fill the remaining slots.
InitialData feasible_initial_design(const RtoProblem& problem, int n_points, int max_attempts,
                                    Rng& rng);

struct ReplicateResult {
  int replicate = 0;
  InitialData initial;
  Eigen::VectorXd u0;
  double delta0 = 0.0;
  RtoResult rto;
  double wall_time_s = 0.0;
  std::optional<std::string> error;
};

struct CampaignResult {
  CampaignConfig config;
  std::vector<ReplicateResult> replicates;
};

CampaignResult run_campaign(const CampaignConfig& config);

inline constexpr std::string_view kResultsHeader =
    "replicate,iteration,subproblem_feasible,plant_ok,accepted,branch,rho,radius,"
    "predicted_cost,cost,incumbent_cost,best_feasible_cost,n_violated,violations,step_norm,point";

void write_results_csv(const CampaignResult& result, std::ostream& out);
nlohmann::json summarize(const CampaignResult& result);

/// Writes results.csv and summary.json. Returns 0, or 2 if any replicate failed.
int write_campaign(const CampaignResult& result, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------

struct MotivateOptions {
  std::uint64_t seed = 3;
  double noise_std = kXsinxNoiseStd;
  std::vector<double> training_x;  // empty: sparse default layout
  double grid_min = 0.0;
  double grid_max = 13.0;
  int grid_points = 1301;
  int restarts = 10;
};

struct MotivateResult {
  Eigen::VectorXd train_x;
  Eigen::VectorXd train_y;
  Eigen::VectorXd train_mean;  // posterior mean at the training inputs
  Eigen::VectorXd grid;
  Eigen::VectorXd truth;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  double noise_sd = 0.0;
  std::vector<bool> escapes_widest;
};

inline constexpr double kBandMultipliers[] = {1.0, 2.0, 3.0, 4.0, 10.0};

/// Training layout near the zeros of sin(x): the data look flat.
std::vector<double> sparse_xsinx_layout();

MotivateResult motivate(const MotivateOptions& options);
void write_bands_csv(const MotivateResult& result, std::ostream& out);

// ---------------------------------------------------------------------------

struct CampaignData {
  std::string label;
  nlohmann::json summary;
  std::vector<std::vector<std::string>> rows;  // results.csv without header
};

/// Reads and validates results.csv and summary.json; throws SchemaMismatch.
CampaignData read_campaign_dir(const std::filesystem::path& dir);

inline constexpr std::string_view kComparisonHeader =
    "label,scenario,iteration,n,cost_mean,cost_min,cost_max,best_feasible_mean,"
    "cumulative_violations";

void write_comparison_csv(const std::vector<CampaignData>& campaigns, std::ostream& out);
nlohmann::json comparison_summary(const std::vector<CampaignData>& campaigns);

/// Required top-level keys of summary.json.
std::vector<std::string> summary_required_keys();

// ---------------------------------------------------------------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

}  // namespace mfrto
