#include "mfrto/multifidelity.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <string>

namespace mfrto {

Eigen::Index find_row(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                      const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (rows.cols() != u.size()) return -1;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if ((rows.row(i).transpose().array() == u.array()).all()) return i;
  }
  return -1;
}

bool NestedDesign::is_nested() const {
  for (Eigen::Index i = 0; i < plant_inputs.rows(); ++i) {
    if (find_row(model_inputs, plant_inputs.row(i).transpose()) < 0) return false;
  }
  return true;
}

bool NestedDesign::plant_rows_unique() const {
  for (Eigen::Index i = 1; i < plant_inputs.rows(); ++i) {
    if (find_row(plant_inputs.topRows(i), plant_inputs.row(i).transpose()) >= 0) return false;
  }
  return true;
}

NestedDesign build_nested_design(const Eigen::Ref<const Eigen::MatrixXd>& plant_inputs,
                                 const Eigen::Ref<const Eigen::MatrixXd>& plant_targets,
                                 int n_extra, const BoxDomain& region,
                                 const ModelEvaluator& model, Rng& rng) {
  if (plant_inputs.rows() != plant_targets.rows()) {
    throw DimensionMismatch("build_nested_design: plant inputs/targets row mismatch");
  }
  if (n_extra < 0) throw OutOfRange("build_nested_design: n_extra must be >= 0");
  if (region.dimension() != plant_inputs.cols()) {
    throw DimensionMismatch("build_nested_design: region dimension mismatch");
  }

  NestedDesign design;
  design.plant_inputs = plant_inputs;
  design.plant_targets = plant_targets;

  // Draw every extra point first so the stream consumed does not depend on
  // which model runs fail.
  Eigen::MatrixXd extra(n_extra, plant_inputs.cols());
  for (int i = 0; i < n_extra; ++i) extra.row(i) = region.sample(rng).transpose();

  std::vector<Eigen::VectorXd> rows;
  std::vector<Eigen::VectorXd> outputs;
  for (Eigen::Index i = 0; i < plant_inputs.rows(); ++i) {
    const Eigen::VectorXd u = plant_inputs.row(i).transpose();
    try {
      outputs.push_back(model(u));
    } catch (const Error& e) {
      throw EvaluationFailed(std::string("model evaluation failed at a plant design point: ") +
                             e.what());
    }
    rows.push_back(u);
  }
  for (int i = 0; i < n_extra; ++i) {
    const Eigen::VectorXd u = extra.row(i).transpose();
    try {
      outputs.push_back(model(u));
      rows.push_back(u);
    } catch (const Error& e) {
      ++design.dropped_model_points;
      std::cerr << "warning: dropping model sample: " << e.what() << '\n';
    }
  }

  const Eigen::Index n_out = outputs.empty() ? plant_targets.cols() : outputs.front().size();
  design.model_inputs.resize(static_cast<Eigen::Index>(rows.size()), plant_inputs.cols());
  design.model_targets.resize(static_cast<Eigen::Index>(rows.size()), n_out);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    design.model_inputs.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    design.model_targets.row(static_cast<Eigen::Index>(i)) = outputs[i].transpose();
  }
  return design;
}

// ---------------------------------------------------------------------------

MultiFidelitySurrogate::MultiFidelitySurrogate(std::optional<GaussianProcess> low,
                                               GaussianProcess delta, double epsilon)
    : low_(std::move(low)), delta_(std::move(delta)), epsilon_(epsilon) {
  if (!low_ && epsilon_ != 0.0) {
    throw OutOfRange("MultiFidelitySurrogate: nonzero epsilon needs a low-fidelity process");
  }
}

Posterior MultiFidelitySurrogate::posterior(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  const Posterior d = delta_.posterior(u);
  if (!low_ || epsilon_ == 0.0) return d;
  const Posterior l = low_->posterior(u);
  return {epsilon_ * l.mean + d.mean,
          std::max(0.0, epsilon_ * epsilon_ * l.variance + d.variance)};
}

Posterior MultiFidelitySurrogate::predictive(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  Posterior p = posterior(u);
  p.variance += delta_.noise_variance_raw();
  return p;
}

namespace {

struct DiscrepancyFit {
  double log_likelihood = -std::numeric_limits<double>::infinity();
  double epsilon = 0.0;
  double residual_mean = 0.0;  // internal units
};

// Concentrated likelihood of the discrepancy for fixed kernel
// hyperparameters. Targets and low-fidelity means are in internal units.
DiscrepancyFit discrepancy_likelihood(const KernelSpec& kernel, double noise,
                                      const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& low_means, bool fit_epsilon) {
  Eigen::MatrixXd a = gram_matrix(kernel, x);
  a.diagonal().array() += noise;
  const PsdFactorization fact = factor_psd(a);

  const Eigen::VectorXd yc = y.array() - y.mean();
  double eps = 0.0;
  if (fit_epsilon) {
    const Eigen::VectorXd lc = low_means.array() - low_means.mean();
    const Eigen::VectorXd wl = fact.solve_lower(lc);
    const double denom = wl.squaredNorm();
    if (denom > 1e-14 * std::max(1.0, lc.squaredNorm())) {
      eps = wl.dot(fact.solve_lower(yc)) / denom;
    } else {
      eps = 1.0;  // model flat over the plant design: scaling unidentifiable
    }
    eps = std::clamp(eps, kEpsilonMin, kEpsilonMax);
  }
  const Eigen::VectorXd r = y - eps * low_means;
  const double mu = r.mean();
  const Eigen::VectorXd w = fact.solve_lower(Eigen::VectorXd(r.array() - mu));
  const double n = static_cast<double>(y.size());
  DiscrepancyFit fit;
  fit.log_likelihood = -0.5 * w.squaredNorm() - 0.5 * fact.log_determinant() -
                       0.5 * n * std::log(2.0 * std::numbers::pi);
  fit.epsilon = eps;
  fit.residual_mean = mu;
  return fit;
}

}  // namespace

MultiFidelitySurrogate fit_multifidelity(const Eigen::Ref<const Eigen::MatrixXd>& model_inputs,
                                         const Eigen::Ref<const Eigen::VectorXd>& model_targets,
                                         const Eigen::Ref<const Eigen::MatrixXd>& plant_inputs,
                                         const Eigen::Ref<const Eigen::VectorXd>& plant_targets,
                                         const MultiFidelityFitOptions& options, Rng& rng) {
  if (plant_inputs.rows() != plant_targets.size()) {
    throw DimensionMismatch("fit_multifidelity: plant inputs/targets mismatch");
  }
  if (plant_inputs.rows() < 1) throw OutOfRange("fit_multifidelity: no plant data");

  std::optional<GaussianProcess> low;
  Eigen::VectorXd low_means = Eigen::VectorXd::Zero(plant_inputs.rows());
  if (options.use_low_fidelity) {
    if (model_inputs.rows() != model_targets.size()) {
      throw DimensionMismatch("fit_multifidelity: model inputs/targets mismatch");
    }
    GpFitOptions low_opts{options.family, options.restarts, options.budget, kLowFidelityNoise};
    low = fit_gp(model_inputs, model_targets, low_opts, rng);
    low_means = low->posterior_means(plant_inputs);
  }

  const Standardizer input_map = Standardizer::fit(plant_inputs);
  const Eigen::MatrixXd x = input_map.apply(plant_inputs);
  const Standardizer out_map = Standardizer::fit(plant_targets);
  const double shift = out_map.shift()(0);
  const double scale = out_map.scale()(0);
  const Eigen::VectorXd y = (plant_targets.array() - shift) / scale;
  const Eigen::VectorXd l = low_means / scale;
  const bool fit_eps = options.use_low_fidelity;

  if (!(options.noise_floor >= 0.0)) throw OutOfRange("fit_multifidelity: negative noise floor");
  const double noise_floor = std::max(kNoiseVarianceMin, options.noise_floor / (scale * scale));

  const HyperparameterSpace space(options.family, plant_inputs.cols());
  const Objective neg_lml = [&](const Eigen::VectorXd& theta) {
    auto [kernel, noise] = space.decode(theta);
    noise = std::max(noise, noise_floor);
    try {
      return -discrepancy_likelihood(kernel, noise, x, y, l, fit_eps).log_likelihood;
    } catch (const NotPositiveDefinite&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const Minimum best = multistart_minimize(neg_lml, space.box(), space.default_point(),
                                           std::max(1, options.restarts), rng, options.budget);
  auto [kernel, noise] = space.decode(best.argmin);
  noise = std::max(noise, noise_floor);

  DiscrepancyFit fit;
  try {
    fit = discrepancy_likelihood(kernel, noise, x, y, l, fit_eps);
  } catch (const NotPositiveDefinite&) {
    // Every candidate failed; fall back to the flattest admissible process.
    kernel = KernelSpec{options.family, kSignalVarianceMin, Eigen::VectorXd::Ones(x.cols())};
    noise = std::max(kNoiseVarianceMax, noise_floor);
    fit = discrepancy_likelihood(kernel, noise, x, y, l, fit_eps);
  }

  const Eigen::VectorXd residuals = plant_targets - fit.epsilon * low_means;
  GaussianProcess delta = GaussianProcess::condition_scaled(
      std::move(kernel), noise, fit.residual_mean, input_map, shift, scale, plant_inputs, residuals);
  return MultiFidelitySurrogate(std::move(low), std::move(delta), fit.epsilon);
}

std::vector<MultiFidelitySurrogate> fit_multifidelity(const NestedDesign& design,
                                                      const MultiFidelityFitOptions& options,
                                                      Rng& rng,
                                                      const Eigen::VectorXd& noise_floors) {
  if (noise_floors.size() != 0 && noise_floors.size() != design.plant_targets.cols()) {
    throw DimensionMismatch("fit_multifidelity: one noise floor per output expected");
  }
  MultiFidelityFitOptions column_opts = options;
  std::vector<MultiFidelitySurrogate> out;
  out.reserve(static_cast<std::size_t>(design.plant_targets.cols()));
  for (Eigen::Index j = 0; j < design.plant_targets.cols(); ++j) {
    const Eigen::VectorXd model_col =
        design.model_targets.cols() > j ? Eigen::VectorXd(design.model_targets.col(j))
                                        : Eigen::VectorXd();
    if (noise_floors.size() != 0) column_opts.noise_floor = noise_floors(j);
    out.push_back(fit_multifidelity(design.model_inputs, model_col, design.plant_inputs,
                                    design.plant_targets.col(j), column_opts, rng));
  }
  return out;
}

}  // namespace mfrto
