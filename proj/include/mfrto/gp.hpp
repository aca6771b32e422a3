#pragma once

// Exact single-fidelity Gaussian process regression.
//
// Training inputs are stored one point per row (N x d). A fitted process
// works internally on standardized inputs and targets; every public query
// takes and returns raw units.

#include <Eigen/Dense>

#include <optional>
#include <string_view>
#include <utility>

#include "mfrto/numerics.hpp"

namespace mfrto {

enum class KernelFamily { SquaredExponential, Matern32, Matern52 };

KernelFamily parse_kernel_family(std::string_view name);
std::string_view to_string(KernelFamily family);

/// Stationary ARD kernel: one lengthscale per input dimension.
struct KernelSpec {
  KernelFamily family = KernelFamily::Matern32;
  double signal_variance = 1.0;
  Eigen::VectorXd lengthscales;

  /// Covariance as a function of the lengthscale-scaled distance r.
  double of_distance(double r) const;
  void validate(Eigen::Index dims) const;
};

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& u,
                   const Eigen::Ref<const Eigen::VectorXd>& v);

/// K(X, X) without noise.
Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x);

/// k(X, u), one entry per row of X.
Eigen::VectorXd cross_covariance(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& u);

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

// Hyperparameter search bounds in standardized units.
inline constexpr double kLengthscaleMin = 1e-2;
inline constexpr double kLengthscaleMax = 1e2;
inline constexpr double kSignalVarianceMin = 1e-4;
inline constexpr double kSignalVarianceMax = 1e2;
inline constexpr double kNoiseVarianceMin = 1e-8;
inline constexpr double kNoiseVarianceMax = 1.0;

/// Log-space encoding of (lengthscales, signal variance[, noise variance]).
class HyperparameterSpace {
 public:
  HyperparameterSpace(KernelFamily family, Eigen::Index dims,
                      std::optional<double> fixed_noise = std::nullopt);

  Eigen::Index size() const { return dims_ + (fixed_noise_ ? 1 : 2); }
  BoxDomain box() const;
  /// Unit lengthscales, unit signal variance, noise 1e-2 (or the fixed value).
  Eigen::VectorXd default_point() const;
  Eigen::VectorXd encode(const KernelSpec& kernel, double noise_variance) const;
  std::pair<KernelSpec, double> decode(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

 private:
  KernelFamily family_;
  Eigen::Index dims_;
  std::optional<double> fixed_noise_;
};

/// Log marginal likelihood of zero-mean targets under K + noise * I.
/// Throws NotPositiveDefinite when the Gram matrix cannot be factored.
double zero_mean_log_likelihood(const KernelSpec& kernel, double noise_variance,
                                const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& centered_targets);

class GaussianProcess {
 public:
  GaussianProcess() = default;

  /// Conditions a process with the given hyperparameters on raw data; no
  /// standardization is applied.
  static GaussianProcess condition(KernelSpec kernel, double noise_variance, double prior_mean,
                                   const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                   const Eigen::Ref<const Eigen::VectorXd>& targets);

  /// Conditions on data expressed through an input standardizer and an
  /// output affine map y_raw = shift + scale * y_internal. Hyperparameters
  /// and the prior mean are in internal units.
  static GaussianProcess condition_scaled(KernelSpec kernel, double noise_variance,
                                          double internal_prior_mean, Standardizer input_map,
                                          double output_shift, double output_scale,
                                          const Eigen::Ref<const Eigen::MatrixXd>& raw_inputs,
                                          const Eigen::Ref<const Eigen::VectorXd>& raw_targets);

  Posterior posterior(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  /// Posterior means at each row of `inputs`.
  Eigen::VectorXd posterior_means(const Eigen::Ref<const Eigen::MatrixXd>& inputs) const;

  /// Evaluated in internal units (raw units for `condition`).
  double log_marginal_likelihood() const;

  /// Prior variance k(u, u) in raw units.
  double prior_variance() const { return output_scale_ * output_scale_ * kernel_.signal_variance; }
  double prior_mean() const { return output_shift_ + output_scale_ * internal_mean_; }
  /// Observation noise variance in raw units.
  double noise_variance_raw() const { return output_scale_ * output_scale_ * noise_; }

  const KernelSpec& kernel() const { return kernel_; }
  double noise_variance() const { return noise_; }
  const Eigen::MatrixXd& training_inputs() const { return raw_inputs_; }
  const Eigen::VectorXd& training_targets() const { return raw_targets_; }
  const PsdFactorization& gram_factorization() const { return gram_; }
  const Standardizer& input_map() const { return input_map_; }
  double output_shift() const { return output_shift_; }
  double output_scale() const { return output_scale_; }
  Eigen::Index input_dimension() const { return raw_inputs_.cols(); }
  Eigen::Index size() const { return raw_inputs_.rows(); }

 private:
  KernelSpec kernel_;
  double noise_ = 0.0;
  double internal_mean_ = 0.0;
  Standardizer input_map_;
  double output_shift_ = 0.0;
  double output_scale_ = 1.0;

  Eigen::MatrixXd raw_inputs_;
  Eigen::VectorXd raw_targets_;
  Eigen::MatrixXd inputs_;   // internal units
  Eigen::VectorXd targets_;  // internal units
  PsdFactorization gram_;
  Eigen::VectorXd alpha_;
};

struct GpFitOptions {
  KernelFamily family = KernelFamily::Matern32;
  int restarts = 10;
  int budget = kDefaultSearchBudget;
  /// Pins the standardized noise variance instead of estimating it.
  std::optional<double> fixed_noise;
};

/// Maximum-likelihood fit with standardized inputs and targets. Identical
/// targets yield a prior-mean-only process with minimal signal variance.
GaussianProcess fit_gp(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                       const Eigen::Ref<const Eigen::VectorXd>& targets,
                       const GpFitOptions& options, Rng& rng);

}  // namespace mfrto
