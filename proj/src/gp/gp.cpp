#include "mfrto/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mfrto {

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "se" || name == "squared_exponential") return KernelFamily::SquaredExponential;
  if (name == "matern32") return KernelFamily::Matern32;
  if (name == "matern52") return KernelFamily::Matern52;
  throw ConfigError("unknown kernel family '" + std::string(name) + "'");
}

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential: return "se";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Matern52: return "matern52";
  }
  return "unknown";
}

double KernelSpec::of_distance(double r) const {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return signal_variance * std::exp(-0.5 * r * r);
    case KernelFamily::Matern32: {
      const double s = std::sqrt(3.0) * r;
      return signal_variance * (1.0 + s) * std::exp(-s);
    }
    case KernelFamily::Matern52: {
      const double s = std::sqrt(5.0) * r;
      return signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
  }
  return 0.0;
}

void KernelSpec::validate(Eigen::Index dims) const {
  if (lengthscales.size() != dims) {
    throw DimensionMismatch("kernel has " + std::to_string(lengthscales.size()) +
                            " lengthscales for " + std::to_string(dims) + " input dimensions");
  }
  if (!(signal_variance > 0.0)) throw OutOfRange("kernel signal variance must be positive");
  if (!(lengthscales.array() > 0.0).all()) throw OutOfRange("kernel lengthscales must be positive");
}

namespace {

double scaled_distance(const Eigen::VectorXd& inv_ls, const Eigen::Ref<const Eigen::VectorXd>& u,
                       const Eigen::Ref<const Eigen::VectorXd>& v) {
  return (u - v).cwiseProduct(inv_ls).norm();
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& u,
                   const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (u.size() != spec.lengthscales.size() || v.size() != spec.lengthscales.size()) {
    throw DimensionMismatch("kernel_eval: point dimension does not match lengthscales");
  }
  const Eigen::VectorXd inv_ls = spec.lengthscales.cwiseInverse();
  return spec.of_distance(scaled_distance(inv_ls, u, v));
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  spec.validate(x.cols());
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd scaled = x * spec.lengthscales.cwiseInverse().asDiagonal();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = spec.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double r = (scaled.row(i) - scaled.row(j)).norm();
      k(i, j) = k(j, i) = spec.of_distance(r);
    }
  }
  return k;
}

Eigen::VectorXd cross_covariance(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (u.size() != x.cols() || u.size() != spec.lengthscales.size()) {
    throw DimensionMismatch("cross_covariance: dimension mismatch");
  }
  const Eigen::VectorXd inv_ls = spec.lengthscales.cwiseInverse();
  Eigen::VectorXd k(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    k(i) = spec.of_distance(scaled_distance(inv_ls, x.row(i).transpose(), u));
  }
  return k;
}

// ---------------------------------------------------------------------------

HyperparameterSpace::HyperparameterSpace(KernelFamily family, Eigen::Index dims,
                                         std::optional<double> fixed_noise)
    : family_(family), dims_(dims), fixed_noise_(fixed_noise) {}

BoxDomain HyperparameterSpace::box() const {
  Eigen::VectorXd lo(size()), hi(size());
  lo.head(dims_).setConstant(std::log(kLengthscaleMin));
  hi.head(dims_).setConstant(std::log(kLengthscaleMax));
  lo(dims_) = std::log(kSignalVarianceMin);
  hi(dims_) = std::log(kSignalVarianceMax);
  if (!fixed_noise_) {
    lo(dims_ + 1) = std::log(kNoiseVarianceMin);
    hi(dims_ + 1) = std::log(kNoiseVarianceMax);
  }
  return BoxDomain(lo, hi);
}

Eigen::VectorXd HyperparameterSpace::default_point() const {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(size());
  if (!fixed_noise_) theta(dims_ + 1) = std::log(1e-2);
  return theta;
}

Eigen::VectorXd HyperparameterSpace::encode(const KernelSpec& kernel, double noise_variance) const {
  Eigen::VectorXd theta(size());
  theta.head(dims_) = kernel.lengthscales.array().log().matrix();
  theta(dims_) = std::log(kernel.signal_variance);
  if (!fixed_noise_) theta(dims_ + 1) = std::log(noise_variance);
  return theta;
}

std::pair<KernelSpec, double> HyperparameterSpace::decode(
    const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  if (theta.size() != size()) throw DimensionMismatch("HyperparameterSpace::decode");
  KernelSpec k;
  k.family = family_;
  k.lengthscales = theta.head(dims_).array().exp().matrix();
  k.signal_variance = std::exp(theta(dims_));
  const double noise = fixed_noise_ ? *fixed_noise_ : std::exp(theta(dims_ + 1));
  return {k, noise};
}

double zero_mean_log_likelihood(const KernelSpec& kernel, double noise_variance,
                                const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& centered_targets) {
  Eigen::MatrixXd a = gram_matrix(kernel, x);
  a.diagonal().array() += noise_variance;
  const PsdFactorization fact = factor_psd(a);
  const Eigen::VectorXd w = fact.solve_lower(centered_targets);
  const double n = static_cast<double>(x.rows());
  return -0.5 * w.squaredNorm() - 0.5 * fact.log_determinant() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------

GaussianProcess GaussianProcess::condition(KernelSpec kernel, double noise_variance,
                                           double prior_mean,
                                           const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                           const Eigen::Ref<const Eigen::VectorXd>& targets) {
  return condition_scaled(std::move(kernel), noise_variance, prior_mean,
                          Standardizer::identity(inputs.cols()), 0.0, 1.0, inputs, targets);
}

GaussianProcess GaussianProcess::condition_scaled(KernelSpec kernel, double noise_variance,
                                                  double internal_prior_mean,
                                                  Standardizer input_map, double output_shift,
                                                  double output_scale,
                                                  const Eigen::Ref<const Eigen::MatrixXd>& raw_inputs,
                                                  const Eigen::Ref<const Eigen::VectorXd>& raw_targets) {
  if (raw_inputs.rows() != raw_targets.size() || raw_inputs.rows() == 0) {
    throw DimensionMismatch("GaussianProcess: need one target per input row and at least one row");
  }
  kernel.validate(raw_inputs.cols());
  if (!(noise_variance >= 0.0)) throw OutOfRange("GaussianProcess: negative noise variance");
  if (!(output_scale > 0.0)) throw OutOfRange("GaussianProcess: output scale must be positive");

  GaussianProcess gp;
  gp.kernel_ = std::move(kernel);
  gp.noise_ = noise_variance;
  gp.internal_mean_ = internal_prior_mean;
  gp.input_map_ = std::move(input_map);
  gp.output_shift_ = output_shift;
  gp.output_scale_ = output_scale;
  gp.raw_inputs_ = raw_inputs;
  gp.raw_targets_ = raw_targets;
  gp.inputs_ = gp.input_map_.apply(raw_inputs);
  gp.targets_ = (raw_targets.array() - output_shift) / output_scale;

  Eigen::MatrixXd a = gram_matrix(gp.kernel_, gp.inputs_);
  a.diagonal().array() += noise_variance;
  gp.gram_ = factor_psd(a);
  gp.alpha_ = gp.gram_.solve(Eigen::VectorXd(gp.targets_.array() - internal_prior_mean));
  return gp;
}

Posterior GaussianProcess::posterior(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  if (u.size() != inputs_.cols()) throw DimensionMismatch("posterior: dimension mismatch");
  const Eigen::VectorXd z = input_map_.apply_point(u);
  const Eigen::VectorXd ks = cross_covariance(kernel_, inputs_, z);
  const double mean = ks.dot(alpha_) + internal_mean_;
  const Eigen::VectorXd v = gram_.solve_lower(ks);
  const double var = std::max(0.0, kernel_.signal_variance - v.squaredNorm());
  return {output_shift_ + output_scale_ * mean, output_scale_ * output_scale_ * var};
}

Eigen::VectorXd GaussianProcess::posterior_means(const Eigen::Ref<const Eigen::MatrixXd>& inputs) const {
  Eigen::VectorXd out(inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const Eigen::VectorXd z = input_map_.apply_point(inputs.row(i).transpose());
    out(i) = output_shift_ + output_scale_ * (cross_covariance(kernel_, inputs_, z).dot(alpha_) +
                                              internal_mean_);
  }
  return out;
}

double GaussianProcess::log_marginal_likelihood() const {
  const Eigen::VectorXd centered = targets_.array() - internal_mean_;
  const double n = static_cast<double>(targets_.size());
  return -0.5 * centered.dot(alpha_) - 0.5 * gram_.log_determinant() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------

GaussianProcess fit_gp(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                       const Eigen::Ref<const Eigen::VectorXd>& targets,
                       const GpFitOptions& options, Rng& rng) {
  if (inputs.rows() != targets.size()) throw DimensionMismatch("fit_gp: inputs/targets mismatch");
  if (inputs.rows() < 1) throw OutOfRange("fit_gp: no training data");

  const Standardizer input_map = Standardizer::fit(inputs);
  const Eigen::MatrixXd x = input_map.apply(inputs);
  const Standardizer output_map = Standardizer::fit(targets);
  const double y_shift = output_map.shift()(0);
  const double y_scale = output_map.scale()(0);
  const Eigen::VectorXd y = (targets.array() - y_shift) / y_scale;
  const Eigen::Index d = inputs.cols();

  const double floor_noise = options.fixed_noise.value_or(kNoiseVarianceMin);
  if ((targets.array() == targets(0)).all()) {
    KernelSpec flat{options.family, kSignalVarianceMin, Eigen::VectorXd::Ones(d)};
    return GaussianProcess::condition_scaled(flat, floor_noise, 0.0, input_map, y_shift, y_scale,
                                             inputs, targets);
  }

  const HyperparameterSpace space(options.family, d, options.fixed_noise);
  const Objective neg_lml = [&](const Eigen::VectorXd& theta) {
    const auto [kernel, noise] = space.decode(theta);
    try {
      return -zero_mean_log_likelihood(kernel, noise, x, y);
    } catch (const NotPositiveDefinite&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const Minimum best = multistart_minimize(neg_lml, space.box(), space.default_point(),
                                           std::max(1, options.restarts), rng, options.budget);
  auto [kernel, noise] = space.decode(best.argmin);
  noise = std::max(noise, floor_noise);
  return GaussianProcess::condition_scaled(std::move(kernel), noise, 0.0, input_map, y_shift,
                                           y_scale, inputs, targets);
}

}  // namespace mfrto
