#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "mfrto/campaign.hpp"

namespace mfrto {

std::vector<double> sparse_xsinx_layout() {
  constexpr double pi = std::numbers::pi;
  return {0.0, pi, 2.0 * pi, 3.0 * pi, 4.0 * pi};
}

MotivateResult motivate(const MotivateOptions& options) {
  if (options.grid_points < 2 || !(options.grid_max > options.grid_min)) {
    throw ConfigError("motivate: grid needs at least two points and grid_max > grid_min");
  }
  const std::vector<double> xs =
      options.training_x.empty() ? sparse_xsinx_layout() : options.training_x;

  Rng rng(options.seed);
  MotivateResult out;
  out.train_x = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  out.train_y.resize(out.train_x.size());
  for (Eigen::Index i = 0; i < out.train_x.size(); ++i) {
    out.train_y(i) = xsinx_sample(out.train_x(i), options.noise_std, rng);
  }

  GpFitOptions fit;
  fit.family = KernelFamily::SquaredExponential;
  fit.restarts = options.restarts;
  const GaussianProcess gp = fit_gp(out.train_x, out.train_y, fit, rng);
  out.noise_sd = std::sqrt(gp.noise_variance_raw());
  out.train_mean = gp.posterior_means(out.train_x);

  out.grid = Eigen::VectorXd::LinSpaced(options.grid_points, options.grid_min, options.grid_max);
  out.truth.resize(out.grid.size());
  out.mean.resize(out.grid.size());
  out.sd.resize(out.grid.size());
  out.escapes_widest.resize(static_cast<std::size_t>(out.grid.size()));
  const double widest = kBandMultipliers[std::size(kBandMultipliers) - 1];
  for (Eigen::Index i = 0; i < out.grid.size(); ++i) {
    const Posterior p = gp.posterior(Eigen::VectorXd::Constant(1, out.grid(i)));
    out.truth(i) = xsinx(out.grid(i));
    out.mean(i) = p.mean;
    out.sd(i) = std::sqrt(p.variance);
    out.escapes_widest[static_cast<std::size_t>(i)] =
        std::abs(out.truth(i) - out.mean(i)) > widest * out.sd(i);
  }
  return out;
}

void write_bands_csv(const MotivateResult& result, std::ostream& out) {
  out << "x,truth,mean,sd";
  for (const double r : kBandMultipliers) {
    out << ",lower_" << r << ",upper_" << r;
  }
  out << ",escapes_widest\n";
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (Eigen::Index i = 0; i < result.grid.size(); ++i) {
    put(result.grid(i));
    out << ',';
    put(result.truth(i));
    out << ',';
    put(result.mean(i));
    out << ',';
    put(result.sd(i));
    for (const double r : kBandMultipliers) {
      out << ',';
      put(result.mean(i) - r * result.sd(i));
      out << ',';
      put(result.mean(i) + r * result.sd(i));
    }
    out << ',' << (result.escapes_widest[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
  }
}

}  // namespace mfrto
