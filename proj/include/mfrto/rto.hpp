#pragma once

// Trust-region real-time optimization driven by multi-fidelity surrogates:
// acquisition functions, the chance-constrained subproblem, the merit ratio,
// radius adaptation and the outer measurement loop.

#include <Eigen/Dense>

#include <optional>
#include <string_view>
#include <vector>

#include "mfrto/chance.hpp"
#include "mfrto/gp.hpp"
#include "mfrto/multifidelity.hpp"
#include "mfrto/numerics.hpp"
#include "mfrto/plant_models.hpp"

namespace mfrto {

struct TrustRegionParams {
  double delta_max = 1.0;
  double eta1 = 0.2;
  double eta2 = 0.8;
  double gamma_red = 0.5;
  double gamma_inc = 2.0;

  void validate() const;
};

/// Radius is measured in the infinity norm on inputs normalized by the
/// domain width, so the region is the box center +/- radius * width.
struct TrustRegionState {
  Eigen::VectorXd center;
  double radius = 0.0;
  TrustRegionParams params;
};

/// Box of half-width inflation * radius * width around `center`, clipped to `domain`.
BoxDomain trust_region_box(const Eigen::Ref<const Eigen::VectorXd>& center, double radius,
                           const BoxDomain& domain, double inflation = 1.0);

double normalized_step_norm(const Eigen::Ref<const Eigen::VectorXd>& step, const BoxDomain& domain);

/// Smallest radius whose box around `center` contains every row of `points`.
double enclosing_radius(const Eigen::Ref<const Eigen::MatrixXd>& points,
                        const Eigen::Ref<const Eigen::VectorXd>& center, const BoxDomain& domain);

// ---------------------------------------------------------------------------

enum class AcquisitionKind { ExpectedImprovement, LowerConfidenceBound };

AcquisitionKind parse_acquisition(std::string_view name);
std::string_view to_string(AcquisitionKind kind);

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::ExpectedImprovement;
  double beta = 2.0;             // LCB only
  double incumbent_best = 0.0;   // EI only
};

/// Value to minimize: LCB is mean - beta * sd; EI is the negated expected
/// improvement over `incumbent_best`.
double acquisition_value(const AcquisitionSpec& spec, const Posterior& post);

// ---------------------------------------------------------------------------

struct ScenarioFlags {
  bool use_trust_region = true;
  bool use_chance_constraints = true;
  bool use_prior_model = true;
};

struct RtoConfig {
  RiskSpec risk{0.1};
  AcquisitionKind acquisition = AcquisitionKind::ExpectedImprovement;
  double beta = 2.0;
  int n_starts = 20;
  int subproblem_budget = kDefaultSearchBudget;
  int n_model_samples = 30;
  int max_iterations = 30;
  ScenarioFlags flags;
  TrustRegionParams trust_region;
  KernelFamily kernel = KernelFamily::Matern32;
  int gp_restarts = 10;
  int gp_budget = kDefaultSearchBudget;
  /// Model samples are drawn in the trust region enlarged by this factor.
  double neighborhood_inflation = 1.2;

  void validate() const;
};

inline constexpr double kFeasibilityTolerance = 1e-6;

struct SubproblemResult {
  bool feasible = false;
  Eigen::VectorXd point;  // u^k + d
  Eigen::VectorXd step;   // d
  double acquisition = 0.0;
  Posterior cost;
  double max_constraint = 0.0;  // largest (robust) constraint value at `point`
};

/// Minimizes the cost acquisition over the trust-region box (or the whole
/// domain without trust region) subject to m_i + r sqrt(S_i) <= 0, with r = 0
/// when chance constraints are off. Uses exact penalties with weights
/// 1e2, 1e4, 1e6 on normalized violations; the returned point is the best
/// feasible point evaluated by any of the searches.
SubproblemResult solve_subproblem(const std::vector<MultiFidelitySurrogate>& surrogates,
                                  const TrustRegionState& state, const RtoConfig& config,
                                  const BoxDomain& domain, double incumbent_best, Rng& rng);

/// Actual over predicted cost reduction; 0 when the predicted reduction
/// has magnitude below 1e-12.
double merit_ratio(double measured_prev, double measured_new, double predicted_prev,
                   double predicted_new);

enum class TrustRegionBranch { SubproblemInfeasible, MeasuredViolation, Expand, Shrink, Keep };

std::string_view to_string(TrustRegionBranch branch);

struct StepOutcome {
  bool subproblem_feasible = true;
  Eigen::VectorXd step;
  Eigen::VectorXd measured_constraints;
  double rho = 0.0;
};

struct TrustRegionUpdate {
  TrustRegionState state;
  bool accepted = false;
  TrustRegionBranch branch = TrustRegionBranch::Keep;
};

TrustRegionUpdate update_trust_region(const TrustRegionState& state, const StepOutcome& outcome,
                                      const BoxDomain& domain);

// ---------------------------------------------------------------------------

struct ExperimentRecord {
  int iteration = 0;
  bool subproblem_feasible = false;
  bool plant_ok = false;
  bool duplicate_point = false;
  Eigen::VectorXd step;
  Eigen::VectorXd point;
  Eigen::VectorXd measured;  // [cost, g...]; empty when nothing was measured
  double predicted_cost = 0.0;
  /// Predictive mean and standard deviation of each constraint at `point`.
  Eigen::VectorXd predicted_constraint_mean;
  Eigen::VectorXd predicted_constraint_sd;
  std::optional<double> rho;
  bool accepted = false;
  TrustRegionBranch branch = TrustRegionBranch::Keep;
  double radius = 0.0;  // after the update; +inf without trust region
  Eigen::VectorXd center;
  std::vector<bool> violations;
  double best_feasible_cost = 0.0;  // NaN until a feasible measurement exists
  double wall_time_s = 0.0;
};

struct InitialData {
  Eigen::MatrixXd inputs;   // one row per point
  Eigen::MatrixXd outputs;  // [cost, g...] per row
};

struct RtoResult {
  std::vector<ExperimentRecord> records;
  Eigen::MatrixXd plant_inputs;
  Eigen::MatrixXd plant_outputs;
  NestedDesign last_design;
  double initial_best_feasible_cost = 0.0;
};

/// Runs the measurement loop for `config.max_iterations` iterations.
RtoResult run_rto(const RtoProblem& problem, const RtoConfig& config, const InitialData& initial,
                  const Eigen::VectorXd& u0, double delta0, Rng& rng);

/// Lowest cost among rows whose constraints are all <= 0, or NaN.
double best_feasible_cost(const Eigen::Ref<const Eigen::MatrixXd>& outputs);

}  // namespace mfrto
