#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mfrto/rto.hpp"

namespace mfrto {

void TrustRegionParams::validate() const {
  if (!(delta_max > 0.0)) throw ConfigError("trust region: delta_max must be positive");
  if (!(0.0 < eta1 && eta1 < eta2 && eta2 < 1.0)) {
    throw ConfigError("trust region: need 0 < eta1 < eta2 < 1");
  }
  if (!(0.0 < gamma_red && gamma_red < 1.0)) throw ConfigError("trust region: need 0 < gamma_red < 1");
  if (!(gamma_inc > 1.0)) throw ConfigError("trust region: need gamma_inc > 1");
}

void RtoConfig::validate() const {
  trust_region.validate();
  if (n_starts < 1) throw ConfigError("n_starts must be >= 1");
  if (n_model_samples < 0) throw ConfigError("n_model_samples must be >= 0");
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (subproblem_budget < 1 || gp_budget < 1) throw ConfigError("search budgets must be >= 1");
  if (gp_restarts < 1) throw ConfigError("gp_restarts must be >= 1");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(neighborhood_inflation >= 1.0)) throw ConfigError("neighborhood_inflation must be >= 1");
}

BoxDomain trust_region_box(const Eigen::Ref<const Eigen::VectorXd>& center, double radius,
                           const BoxDomain& domain, double inflation) {
  const Eigen::VectorXd half = inflation * radius * domain.width();
  return BoxDomain(center - half, center + half).intersect(domain);
}

double normalized_step_norm(const Eigen::Ref<const Eigen::VectorXd>& step, const BoxDomain& domain) {
  double norm = 0.0;
  const Eigen::VectorXd w = domain.width();
  for (Eigen::Index i = 0; i < step.size(); ++i) {
    if (w(i) > 0.0) norm = std::max(norm, std::abs(step(i)) / w(i));
  }
  return norm;
}

double enclosing_radius(const Eigen::Ref<const Eigen::MatrixXd>& points,
                        const Eigen::Ref<const Eigen::VectorXd>& center, const BoxDomain& domain) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    r = std::max(r, normalized_step_norm(points.row(i).transpose() - center, domain));
  }
  return r;
}

// ---------------------------------------------------------------------------

AcquisitionKind parse_acquisition(std::string_view name) {
  if (name == "ei") return AcquisitionKind::ExpectedImprovement;
  if (name == "lcb") return AcquisitionKind::LowerConfidenceBound;
  throw ConfigError("unknown acquisition '" + std::string(name) + "' (expected ei or lcb)");
}

std::string_view to_string(AcquisitionKind kind) {
  return kind == AcquisitionKind::ExpectedImprovement ? "ei" : "lcb";
}

double acquisition_value(const AcquisitionSpec& spec, const Posterior& post) {
  const double sd = std::sqrt(std::max(0.0, post.variance));
  if (spec.kind == AcquisitionKind::LowerConfidenceBound) return post.mean - spec.beta * sd;

  const double gain = spec.incumbent_best - post.mean;
  if (sd <= 0.0) return -std::max(gain, 0.0);
  const double z = gain / sd;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return -(gain * cdf + sd * pdf);
}

// ---------------------------------------------------------------------------

SubproblemResult solve_subproblem(const std::vector<MultiFidelitySurrogate>& surrogates,
                                  const TrustRegionState& state, const RtoConfig& config,
                                  const BoxDomain& domain, double incumbent_best, Rng& rng) {
  if (surrogates.empty()) throw OutOfRange("solve_subproblem: need a cost surrogate");
  const BoxDomain box = config.flags.use_trust_region
                            ? trust_region_box(state.center, state.radius, domain)
                            : domain;
  const double r = config.flags.use_chance_constraints ? config.risk.multiplier() : 0.0;
  const AcquisitionSpec acq{config.acquisition, config.beta, incumbent_best};

  const auto positive_scale = [](double s) { return s > 0.0 && std::isfinite(s) ? s : 1.0; };
  const double cost_scale = positive_scale(surrogates.front().plant_scale());
  std::vector<double> con_scale;
  for (std::size_t i = 1; i < surrogates.size(); ++i) {
    con_scale.push_back(positive_scale(surrogates[i].plant_scale()));
  }

  struct Candidate {
    bool found = false;
    double acquisition = std::numeric_limits<double>::infinity();
    Eigen::VectorXd point;
  } best;

  const auto evaluate = [&](const Eigen::VectorXd& u, double& acq_out, double& max_con,
                            double& violation) {
    acq_out = acquisition_value(acq, surrogates.front().posterior(u));
    max_con = -std::numeric_limits<double>::infinity();
    violation = 0.0;
    for (std::size_t i = 1; i < surrogates.size(); ++i) {
      const double c = robust_constraint_value(surrogates[i].predictive(u), r);
      max_con = std::max(max_con, c);
      violation += std::max(0.0, c) / con_scale[i - 1];
    }
  };

  for (const double weight : {1e2, 1e4, 1e6}) {
    const Objective penalized = [&](const Eigen::VectorXd& u) {
      double a = 0.0, max_con = 0.0, violation = 0.0;
      evaluate(u, a, max_con, violation);
      if (max_con <= kFeasibilityTolerance && a < best.acquisition) {
        best.found = true;
        best.acquisition = a;
        best.point = u;
      }
      return a / cost_scale + weight * violation;
    };
    const Minimum m = multistart_minimize(penalized, box, state.center, config.n_starts, rng,
                                          config.subproblem_budget);
    double a = 0.0, max_con = 0.0, violation = 0.0;
    evaluate(m.argmin, a, max_con, violation);
    if (max_con <= kFeasibilityTolerance) break;
  }

  SubproblemResult result;
  if (!best.found) return result;
  result.feasible = true;
  result.point = best.point;
  result.step = best.point - state.center;
  result.acquisition = best.acquisition;
  result.cost = surrogates.front().posterior(best.point);
  double a = 0.0, violation = 0.0;
  evaluate(best.point, a, result.max_constraint, violation);
  return result;
}

double merit_ratio(double measured_prev, double measured_new, double predicted_prev,
                   double predicted_new) {
  const double predicted = predicted_prev - predicted_new;
  if (!(std::abs(predicted) >= 1e-12)) return 0.0;
  return (measured_prev - measured_new) / predicted;
}

std::string_view to_string(TrustRegionBranch branch) {
  switch (branch) {
    case TrustRegionBranch::SubproblemInfeasible: return "subproblem_infeasible";
    case TrustRegionBranch::MeasuredViolation: return "measured_violation";
    case TrustRegionBranch::Expand: return "expand";
    case TrustRegionBranch::Shrink: return "shrink";
    case TrustRegionBranch::Keep: return "keep";
  }
  return "unknown";
}

TrustRegionUpdate update_trust_region(const TrustRegionState& state, const StepOutcome& outcome,
                                      const BoxDomain& domain) {
  const TrustRegionParams& p = state.params;
  TrustRegionUpdate up;
  up.state = state;

  const auto reject = [&](TrustRegionBranch branch) {
    up.state.radius = p.gamma_red * state.radius;
    up.accepted = false;
    up.branch = branch;
    return up;
  };

  if (!outcome.subproblem_feasible) return reject(TrustRegionBranch::SubproblemInfeasible);
  if ((outcome.measured_constraints.array() > 0.0).any()) {
    return reject(TrustRegionBranch::MeasuredViolation);
  }

  const bool on_boundary =
      normalized_step_norm(outcome.step, domain) >= state.radius * (1.0 - 1e-6);
  if (outcome.rho > p.eta2 && on_boundary) {
    up.state.radius = std::min(p.gamma_inc * state.radius, p.delta_max);
    up.state.center = state.center + outcome.step;
    up.accepted = true;
    up.branch = TrustRegionBranch::Expand;
    return up;
  }
  if (outcome.rho < p.eta1) return reject(TrustRegionBranch::Shrink);

  up.state.center = state.center + outcome.step;
  up.accepted = true;
  up.branch = TrustRegionBranch::Keep;
  return up;
}

}  // namespace mfrto
