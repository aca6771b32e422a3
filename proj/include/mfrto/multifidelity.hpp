#pragma once

// Two-level autoregressive surrogate: plant(u) = epsilon * model(u) + delta(u),
// fitted in two decoupled stages on nested designs (plant inputs are a subset
// of model inputs).

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

#include "mfrto/gp.hpp"
#include "mfrto/numerics.hpp"

namespace mfrto {

/// Training sets for both fidelity levels. Targets carry one column per
/// output (cost first, then constraints).
struct NestedDesign {
  Eigen::MatrixXd model_inputs;
  Eigen::MatrixXd model_targets;
  Eigen::MatrixXd plant_inputs;
  Eigen::MatrixXd plant_targets;
  int dropped_model_points = 0;

  /// Every plant row occurs bit-for-bit among the model rows.
  bool is_nested() const;
  bool plant_rows_unique() const;
};

/// Row index of `u` in `rows` under exact equality, or -1.
Eigen::Index find_row(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                      const Eigen::Ref<const Eigen::VectorXd>& u);

/// Deterministic low-fidelity simulator returning all outputs at a point.
using ModelEvaluator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Model inputs = plant inputs followed by `n_extra` uniform draws on
/// `region`. The model is run once per row. A failing run on an extra point
/// drops that point; on a plant point it throws EvaluationFailed.
NestedDesign build_nested_design(const Eigen::Ref<const Eigen::MatrixXd>& plant_inputs,
                                 const Eigen::Ref<const Eigen::MatrixXd>& plant_targets,
                                 int n_extra, const BoxDomain& region,
                                 const ModelEvaluator& model, Rng& rng);

class MultiFidelitySurrogate {
 public:
  MultiFidelitySurrogate() = default;
  /// `low` may be empty, in which case epsilon must be zero.
  MultiFidelitySurrogate(std::optional<GaussianProcess> low, GaussianProcess delta, double epsilon);

  Posterior posterior(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  /// Distribution of a fresh plant measurement: posterior plus delta's noise variance.
  Posterior predictive(const Eigen::Ref<const Eigen::VectorXd>& u) const;

  double epsilon() const { return epsilon_; }
  const std::optional<GaussianProcess>& low() const { return low_; }
  const GaussianProcess& delta() const { return delta_; }
  /// Spread of the plant targets, used to normalize penalties and acquisitions.
  double plant_scale() const { return delta_.output_scale(); }

 private:
  std::optional<GaussianProcess> low_;
  GaussianProcess delta_;
  double epsilon_ = 0.0;
};

inline constexpr double kEpsilonMin = -10.0;
inline constexpr double kEpsilonMax = 10.0;
inline constexpr double kLowFidelityNoise = 1e-8;

struct MultiFidelityFitOptions {
  KernelFamily family = KernelFamily::Matern32;
  int restarts = 10;
  int budget = kDefaultSearchBudget;
  /// false: drop the model entirely (epsilon pinned to 0, plant data only).
  bool use_low_fidelity = true;
  /// Lower bound on delta's noise variance in raw target units.
  double noise_floor = 0.0;
};

/// Fits one output. Stage 1: noiseless GP on the model data. Stage 2:
/// kernel hyperparameters of delta by likelihood maximization, with epsilon
/// concentrated out in closed form (the likelihood is quadratic in it) and
/// clamped to [kEpsilonMin, kEpsilonMax].
MultiFidelitySurrogate fit_multifidelity(const Eigen::Ref<const Eigen::MatrixXd>& model_inputs,
                                         const Eigen::Ref<const Eigen::VectorXd>& model_targets,
                                         const Eigen::Ref<const Eigen::MatrixXd>& plant_inputs,
                                         const Eigen::Ref<const Eigen::VectorXd>& plant_targets,
                                         const MultiFidelityFitOptions& options, Rng& rng);

/// One independent surrogate per output column of the design. A nonempty
/// `noise_floors` overrides options.noise_floor column by column.
std::vector<MultiFidelitySurrogate> fit_multifidelity(const NestedDesign& design,
                                                      const MultiFidelityFitOptions& options,
                                                      Rng& rng,
                                                      const Eigen::VectorXd& noise_floors = {});

}  // namespace mfrto
