#include <cmath>

#include "mfrto/plant_models.hpp"

namespace mfrto {

double xsinx(double x) { return x * std::sin(x); }

double xsinx_sample(double x, double noise_std, Rng& rng) {
  if (noise_std <= 0.0) return xsinx(x);
  std::normal_distribution<double> n(0.0, noise_std);
  return xsinx(x) + n(rng);
}

RtoProblem xsinx_problem(double noise_std) {
  RtoProblem p;
  p.name = "xsinx";
  p.domain = BoxDomain(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 12.0));
  p.n_constraints = 0;
  p.plant = [noise_std](const Eigen::VectorXd& u, Rng& rng) {
    return Eigen::VectorXd::Constant(1, xsinx_sample(u(0), noise_std, rng)).eval();
  };
  p.plant_noiseless = [](const Eigen::VectorXd& u) {
    return Eigen::VectorXd::Constant(1, xsinx(u(0))).eval();
  };
  p.model = [](const Eigen::VectorXd& u) {
    return Eigen::VectorXd::Constant(1, 0.9 * xsinx(u(0)) + 0.5).eval();
  };
  return p;
}

namespace {

Eigen::VectorXd synthetic_plant(const Eigen::VectorXd& u) {
  Eigen::VectorXd out(2);
  out(0) = (u(0) - 1.0) * (u(0) - 1.0) + (u(1) - 1.0) * (u(1) - 1.0);
  out(1) = u(0) + u(1) - 1.0;
  return out;
}

}  // namespace

SyntheticBenchmark synthetic_benchmark(double mismatch, double noise_std) {
  SyntheticBenchmark bench;
  bench.optimum = Eigen::Vector2d(0.5, 0.5);
  bench.optimal_cost = 0.5;

  RtoProblem& p = bench.problem;
  p.name = "synthetic";
  p.domain = BoxDomain(Eigen::Vector2d(-2.0, -2.0), Eigen::Vector2d(2.0, 2.0));
  p.n_constraints = 1;
  p.measurement_noise_variance = Eigen::VectorXd::Constant(2, noise_std > 0.0 ? noise_std * noise_std : 0.0);
  p.plant_noiseless = [](const Eigen::VectorXd& u) {
    if (u.size() != 2) throw DimensionMismatch("synthetic benchmark expects 2 inputs");
    return synthetic_plant(u);
  };
  p.plant = [noise_std](const Eigen::VectorXd& u, Rng& rng) {
    if (u.size() != 2) throw DimensionMismatch("synthetic benchmark expects 2 inputs");
    Eigen::VectorXd out = synthetic_plant(u);
    if (noise_std > 0.0) {
      std::normal_distribution<double> n(0.0, noise_std);
      for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += n(rng);
    }
    return out;
  };
  p.model = [mismatch](const Eigen::VectorXd& u) {
    if (u.size() != 2) throw DimensionMismatch("synthetic benchmark expects 2 inputs");
    Eigen::VectorXd out = synthetic_plant(u);
    out(0) += mismatch * (0.6 * u(0) - 0.4 * u(1) + 0.3);
    out(1) += mismatch * (0.2 * u(0) - 0.25 * u(1) + 0.1);
    return out;
  };
  return bench;
}

}  // namespace mfrto
