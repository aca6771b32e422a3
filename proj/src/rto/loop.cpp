#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "mfrto/rto.hpp"

namespace mfrto {

double best_feasible_cost(const Eigen::Ref<const Eigen::MatrixXd>& outputs) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    const bool feasible = outputs.cols() == 1 || (outputs.row(i).tail(outputs.cols() - 1).array() <= 0.0).all();
    if (feasible && !(outputs(i, 0) >= best)) best = outputs(i, 0);
  }
  return best;
}

namespace {

// Best feasible measured cost; without any, the cost of the least violating point.
double expected_improvement_incumbent(const Eigen::MatrixXd& outputs) {
  const double feasible = best_feasible_cost(outputs);
  if (!std::isnan(feasible)) return feasible;
  Eigen::Index worst_index = 0;
  double least = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    const double v = outputs.row(i).tail(outputs.cols() - 1).maxCoeff();
    if (v < least) {
      least = v;
      worst_index = i;
    }
  }
  return outputs(worst_index, 0);
}

// Exact-match memo of the deterministic model.
class ModelCache {
 public:
  explicit ModelCache(const RtoProblem& problem) : problem_(problem) {}

  Eigen::VectorXd operator()(const Eigen::VectorXd& u) {
    std::vector<double> key(u.data(), u.data() + u.size());
    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Eigen::VectorXd out = problem_.model(u);
    cache_.emplace(std::move(key), out);
    return out;
  }

 private:
  const RtoProblem& problem_;
  std::map<std::vector<double>, Eigen::VectorXd> cache_;
};

void append_row(Eigen::MatrixXd& m, const Eigen::VectorXd& row) {
  m.conservativeResize(m.rows() + 1, Eigen::NoChange);
  m.row(m.rows() - 1) = row.transpose();
}

}  // namespace

RtoResult run_rto(const RtoProblem& problem, const RtoConfig& config, const InitialData& initial,
                  const Eigen::VectorXd& u0, double delta0, Rng& rng) {
  config.validate();
  const BoxDomain& domain = problem.domain;
  const Eigen::Index n_out = 1 + problem.n_constraints;
  if (initial.inputs.rows() == 0 || initial.inputs.rows() != initial.outputs.rows()) {
    throw OutOfRange("run_rto: initial plant data must be nonempty with one output row per input");
  }
  if (initial.inputs.cols() != domain.dimension() || initial.outputs.cols() != n_out) {
    throw DimensionMismatch("run_rto: initial data dimensions do not match the problem");
  }
  if (!domain.contains(u0)) throw OutOfRange("run_rto: u0 outside the domain");

  RtoResult result;
  result.plant_inputs = initial.inputs;
  result.plant_outputs = initial.outputs;

  Eigen::Index center_row = find_row(result.plant_inputs, u0);
  if (center_row < 0) {
    append_row(result.plant_inputs, u0);
    append_row(result.plant_outputs, problem.plant(u0, rng));
    center_row = result.plant_inputs.rows() - 1;
  }
  result.initial_best_feasible_cost = best_feasible_cost(result.plant_outputs);

  TrustRegionState state;
  state.center = u0;
  state.params = config.trust_region;
  state.radius = config.flags.use_trust_region ? std::min(delta0, config.trust_region.delta_max)
                                               : config.trust_region.delta_max;
  if (!(state.radius > 0.0)) throw OutOfRange("run_rto: initial radius must be positive");
  double center_cost = result.plant_outputs(center_row, 0);

  ModelCache model(problem);
  const ModelEvaluator model_fn = [&model](const Eigen::VectorXd& u) { return model(u); };
  MultiFidelityFitOptions fit_opts;
  fit_opts.family = config.kernel;
  fit_opts.restarts = config.gp_restarts;
  fit_opts.budget = config.gp_budget;
  fit_opts.use_low_fidelity = config.flags.use_prior_model;
  const int n_extra = config.flags.use_prior_model ? config.n_model_samples : 0;

  const auto sampling_region = [&]() {
    return config.flags.use_trust_region
               ? trust_region_box(state.center, state.radius, domain, config.neighborhood_inflation)
               : domain;
  };
  const auto refit = [&]() {
    result.last_design = config.flags.use_prior_model
                             ? build_nested_design(result.plant_inputs, result.plant_outputs,
                                                   n_extra, sampling_region(), model_fn, rng)
                             : NestedDesign{Eigen::MatrixXd(0, domain.dimension()),
                                            Eigen::MatrixXd(0, n_out), result.plant_inputs,
                                            result.plant_outputs, 0};
    return fit_multifidelity(result.last_design, fit_opts, rng, problem.measurement_noise_variance);
  };

  std::vector<MultiFidelitySurrogate> surrogates = refit();

  for (int k = 0; k < config.max_iterations; ++k) {
    const auto t_start = std::chrono::steady_clock::now();
    ExperimentRecord rec;
    rec.iteration = k;

    const double incumbent = expected_improvement_incumbent(result.plant_outputs);
    const SubproblemResult sub = solve_subproblem(surrogates, state, config, domain, incumbent, rng);
    rec.subproblem_feasible = sub.feasible;

    StepOutcome outcome;
    outcome.subproblem_feasible = sub.feasible;
    outcome.step = Eigen::VectorXd::Zero(domain.dimension());
    outcome.measured_constraints = Eigen::VectorXd::Zero(problem.n_constraints);

    if (sub.feasible) {
      rec.step = sub.step;
      rec.point = sub.point;
      rec.predicted_cost = sub.cost.mean;
      rec.predicted_constraint_mean.resize(problem.n_constraints);
      rec.predicted_constraint_sd.resize(problem.n_constraints);
      for (Eigen::Index i = 0; i < problem.n_constraints; ++i) {
        const Posterior p = surrogates[static_cast<std::size_t>(i + 1)].predictive(sub.point);
        rec.predicted_constraint_mean(i) = p.mean;
        rec.predicted_constraint_sd(i) = std::sqrt(p.variance);
      }
      outcome.step = sub.step;
      try {
        rec.measured = problem.plant(sub.point, rng);
        rec.plant_ok = true;
      } catch (const EvaluationFailed&) {
        rec.plant_ok = false;
      }
      if (rec.plant_ok) {
        outcome.measured_constraints = rec.measured.tail(problem.n_constraints);
        for (Eigen::Index i = 0; i < problem.n_constraints; ++i) {
          rec.violations.push_back(outcome.measured_constraints(i) > 0.0);
        }
        // A measured violation skips the ratio test altogether.
        if (!(outcome.measured_constraints.array() > 0.0).any()) {
          const double predicted_prev = surrogates.front().posterior(state.center).mean;
          outcome.rho = merit_ratio(center_cost, rec.measured(0), predicted_prev, sub.cost.mean);
          rec.rho = outcome.rho;
        }
      } else {
        // Failed measurement: treated like an infeasible step.
        outcome.subproblem_feasible = false;
      }
    }

    TrustRegionUpdate up = update_trust_region(state, outcome, domain);
    if (up.accepted) up.state.center = sub.point;
    if (!config.flags.use_trust_region) up.state.radius = state.radius;
    rec.accepted = up.accepted;
    rec.branch = up.branch;

    if (rec.plant_ok) {
      const Eigen::Index existing = find_row(result.plant_inputs, sub.point);
      if (existing >= 0) {
        rec.duplicate_point = true;
      } else {
        append_row(result.plant_inputs, sub.point);
        append_row(result.plant_outputs, rec.measured);
      }
      if (up.accepted) center_cost = rec.measured(0);
    }

    state = up.state;
    rec.center = state.center;
    rec.radius = config.flags.use_trust_region ? state.radius
                                               : std::numeric_limits<double>::infinity();
    rec.best_feasible_cost = best_feasible_cost(result.plant_outputs);

    if (k + 1 < config.max_iterations) surrogates = refit();
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace mfrto
