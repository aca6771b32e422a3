#include <doctest.h>

#include <cmath>

#include "mfrto/errors.hpp"
#include "mfrto/multifidelity.hpp"
#include "oracles.hpp"

using namespace mfrto;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const ModelEvaluator kQuadraticModel = [](const VectorXd& u) {
  VectorXd out(2);
  out(0) = u.squaredNorm();
  out(1) = u.sum() - 0.5;
  return out;
};

}  // namespace

TEST_CASE("find_row uses exact equality") {
  MatrixXd rows(3, 2);
  rows << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  CHECK(find_row(rows, Eigen::Vector2d(0.3, 0.4)) == 1);
  CHECK(find_row(rows, Eigen::Vector2d(0.3, std::nextafter(0.4, 1.0))) == -1);
  CHECK(find_row(rows, Eigen::Vector3d(0.3, 0.4, 0.0)) == -1);
}

TEST_CASE("build_nested_design: sizes, nesting, bounds, determinism") {
  const BoxDomain box(VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));
  const MatrixXd xp = MatrixXd::Random(5, 2) * 0.5;
  MatrixXd yp(5, 2);
  for (int i = 0; i < 5; ++i) yp.row(i) = kQuadraticModel(xp.row(i).transpose()).transpose();

  Rng rng(1);
  const NestedDesign none = build_nested_design(xp, yp, 0, box, kQuadraticModel, rng);
  CHECK(none.model_inputs == xp);
  CHECK(none.is_nested());

  Rng a(7), b(7);
  const NestedDesign d1 = build_nested_design(xp, yp, 30, box, kQuadraticModel, a);
  const NestedDesign d2 = build_nested_design(xp, yp, 30, box, kQuadraticModel, b);
  CHECK(d1.model_inputs.rows() == 35);
  CHECK(d1.model_targets.cols() == 2);
  CHECK(d1.is_nested());
  CHECK(d1.plant_rows_unique());
  CHECK(d1.model_inputs == d2.model_inputs);
  CHECK(d1.model_targets == d2.model_targets);
  for (Eigen::Index i = 0; i < d1.model_inputs.rows(); ++i) {
    CHECK(box.contains(d1.model_inputs.row(i).transpose()));
  }
}

TEST_CASE("build_nested_design drops failing extra points but not plant points") {
  const BoxDomain box(VectorXd::Constant(1, 0.0), VectorXd::Constant(1, 1.0));
  const ModelEvaluator picky = [](const VectorXd& u) {
    if (u(0) > 0.5) throw EvaluationFailed("diverged");
    return VectorXd::Constant(1, u(0)).eval();
  };
  MatrixXd xp(2, 1);
  xp << 0.1, 0.2;
  Rng rng(3);
  const NestedDesign d = build_nested_design(xp, MatrixXd::Zero(2, 1), 40, box, picky, rng);
  CHECK(d.dropped_model_points > 0);
  CHECK(d.model_inputs.rows() == 42 - d.dropped_model_points);
  CHECK(d.is_nested());

  MatrixXd bad(1, 1);
  bad << 0.9;
  CHECK_THROWS_AS(build_nested_design(bad, MatrixXd::Zero(1, 1), 0, box, picky, rng), EvaluationFailed);
}

TEST_CASE("surrogate posterior composes the two levels") {
  KernelSpec k{KernelFamily::Matern52, 1.0, VectorXd::Ones(1)};
  MatrixXd xm(3, 1), xp(2, 1);
  xm << 0.0, 0.5, 1.0;
  xp << 0.0, 1.0;
  const auto low = GaussianProcess::condition(k, 1e-8, 0.0, xm, Eigen::Vector3d(0.0, 1.0, 0.5));
  const auto delta = GaussianProcess::condition(k, 1e-6, 0.0, xp, Eigen::Vector2d(0.2, -0.1));
  const MultiFidelitySurrogate s(low, delta, 1.5);
  const VectorXd u = VectorXd::Constant(1, 0.3);
  const Posterior l = low.posterior(u), d = delta.posterior(u), p = s.posterior(u);
  CHECK(p.mean == doctest::Approx(1.5 * l.mean + d.mean).epsilon(1e-14));
  CHECK(p.variance == doctest::Approx(2.25 * l.variance + d.variance).epsilon(1e-14));
  CHECK(s.plant_scale() == 1.0);
  CHECK_THROWS_AS(MultiFidelitySurrogate(std::nullopt, delta, 0.5), OutOfRange);
}

TEST_CASE("two-level posterior equals the monolithic dense oracle on a hand-built instance") {
  oracle::TwoLevel p{oracle::Family::M32, 1.2, VectorXd::Constant(1, 0.7), 0.0, 0.4,
                     0.3, VectorXd::Constant(1, 1.1), 1e-4, -0.2, 1.8};
  MatrixXd xm(3, 1), xp(2, 1);
  xm << 0.0, 0.45, 1.0;
  xp << 0.0, 1.0;
  const VectorXd ym = Eigen::Vector3d(0.3, 1.1, -0.4);
  const VectorXd yp = Eigen::Vector2d(0.9, -0.8);

  const KernelSpec kl{KernelFamily::Matern32, p.low_sf2, p.low_ell};
  const KernelSpec kd{KernelFamily::Matern32, p.delta_sf2, p.delta_ell};
  const auto low = GaussianProcess::condition(kl, 0.0, p.low_mean, xm, ym);
  const VectorXd ylow_at_p = Eigen::Vector2d(ym(0), ym(2));
  const auto delta = GaussianProcess::condition(kd, p.delta_noise, p.delta_mean, xp, yp - p.eps * ylow_at_p);
  const MultiFidelitySurrogate s(low, delta, p.eps);
  for (const double u : {-0.3, 0.2, 0.45, 0.77, 1.6}) {
    const auto o = oracle::two_level_posterior(p, xm, ym, xp, yp, VectorXd::Constant(1, u));
    const Posterior q = s.posterior(VectorXd::Constant(1, u));
    CHECK(std::abs(q.mean - o.mean) < 1e-8);
    CHECK(std::abs(q.variance - o.variance) < 1e-8);
  }
}

TEST_CASE("epsilon = 0 collapses to a plain plant GP") {
  KernelSpec k{KernelFamily::Matern32, 0.9, Eigen::Vector2d(0.5, 2.0)};
  const MatrixXd xp = MatrixXd::Random(7, 2);
  const VectorXd yp = VectorXd::Random(7);
  const auto plain = GaussianProcess::condition(k, 1e-3, 0.1, xp, yp);
  const auto low = GaussianProcess::condition(k, 1e-8, 0.0, xp, VectorXd::Random(7));
  const MultiFidelitySurrogate s(low, plain, 0.0);
  for (int i = 0; i < 10; ++i) {
    const VectorXd u = VectorXd::Random(2);
    CHECK(std::abs(s.posterior(u).mean - plain.posterior(u).mean) <= 1e-10);
    CHECK(std::abs(s.posterior(u).variance - plain.posterior(u).variance) <= 1e-10);
  }
}

TEST_CASE("fit_multifidelity: plant equal to model gives epsilon near 1 and a negligible discrepancy") {
  const BoxDomain box(VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));
  Rng rng(12);
  MatrixXd xp(8, 2);
  for (int i = 0; i < 8; ++i) xp.row(i) = box.sample(rng).transpose();
  MatrixXd yp(8, 2);
  for (int i = 0; i < 8; ++i) yp.row(i) = kQuadraticModel(xp.row(i).transpose()).transpose();
  const NestedDesign d = build_nested_design(xp, yp, 30, box, kQuadraticModel, rng);
  const auto s = fit_multifidelity(d, {}, rng);
  REQUIRE(s.size() == 2);
  CHECK(s[0].epsilon() == doctest::Approx(1.0).epsilon(1e-2));
  for (int i = 0; i < 8; ++i) {
    const double delta_mean = s[0].delta().posterior(xp.row(i).transpose()).mean;
    CHECK(std::abs(delta_mean) / s[0].plant_scale() < 1e-4);
  }
}

TEST_CASE("fit_multifidelity absorbs an affine plant-model relation") {
  const BoxDomain box(VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));
  const ModelEvaluator model = [](const VectorXd& u) {
    return VectorXd::Constant(1, std::sin(2.0 * u(0)) + u(1) * u(1)).eval();
  };
  Rng rng(33);
  MatrixXd xp(10, 2);
  for (int i = 0; i < 10; ++i) xp.row(i) = box.sample(rng).transpose();
  MatrixXd yp(10, 1);
  for (int i = 0; i < 10; ++i) yp(i, 0) = 2.0 * model(xp.row(i).transpose())(0) + 5.0;
  const NestedDesign d = build_nested_design(xp, yp, 40, box, model, rng);
  MultiFidelityFitOptions opts;
  opts.family = KernelFamily::SquaredExponential;
  const auto s = fit_multifidelity(d, opts, rng);
  Rng probe(5);
  for (int t = 0; t < 10; ++t) {
    const VectorXd u = box.sample(probe) * 0.8;
    CHECK(std::abs(s[0].posterior(u).mean - (2.0 * model(u)(0) + 5.0)) < 1e-3);
  }
}

TEST_CASE("fit_multifidelity: residual bookkeeping and nested low-fidelity certainty") {
  const BoxDomain box(VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));
  Rng rng(2);
  MatrixXd xp(6, 2);
  for (int i = 0; i < 6; ++i) xp.row(i) = box.sample(rng).transpose();
  MatrixXd yp(6, 1);
  for (int i = 0; i < 6; ++i) yp(i, 0) = std::cos(3 * xp(i, 0)) + xp(i, 1);
  const NestedDesign d = build_nested_design(xp, yp, 20, box, kQuadraticModel, rng);
  const auto s = fit_multifidelity(d.model_inputs, d.model_targets.col(0), d.plant_inputs,
                                   d.plant_targets.col(0), {}, rng);
  REQUIRE(s.low().has_value());
  const VectorXd expect = yp.col(0) - s.epsilon() * s.low()->posterior_means(xp);
  CHECK((s.delta().training_targets() - expect).norm() < 1e-12);
  CHECK(s.low()->noise_variance() == doctest::Approx(kLowFidelityNoise));
  for (int i = 0; i < 6; ++i) {
    CHECK(s.low()->posterior(xp.row(i).transpose()).variance / (s.low()->output_scale() * s.low()->output_scale()) <= kLowFidelityNoise * (1.0 + 1e-6));
  }
  CHECK(s.epsilon() >= kEpsilonMin);
  CHECK(s.epsilon() <= kEpsilonMax);
}

TEST_CASE("fit_multifidelity tolerates targets unrelated to the model") {
  const BoxDomain box(VectorXd::Constant(1, 0.0), VectorXd::Constant(1, 1.0));
  Rng rng(8);
  std::normal_distribution<double> z;
  MatrixXd xp(8, 1), yp(8, 1);
  for (int i = 0; i < 8; ++i) {
    xp(i, 0) = box.sample(rng)(0);
    yp(i, 0) = z(rng);
  }
  const ModelEvaluator model = [](const VectorXd& u) { return VectorXd::Constant(1, std::sin(6 * u(0))).eval(); };
  const NestedDesign d = build_nested_design(xp, yp, 20, box, model, rng);
  const auto s = fit_multifidelity(d, {}, rng);
  for (const double u : {0.05, 0.5, 0.95}) {
    const Posterior p = s[0].posterior(VectorXd::Constant(1, u));
    CHECK(std::isfinite(p.mean));
    CHECK(p.variance >= 0.0);
  }
}

TEST_CASE("fit_multifidelity without the model pins epsilon to zero") {
  Rng rng(4);
  const MatrixXd xp = MatrixXd::Random(7, 2);
  const VectorXd yp = VectorXd::Random(7);
  MultiFidelityFitOptions opts;
  opts.use_low_fidelity = false;
  const auto s = fit_multifidelity(MatrixXd(0, 2), VectorXd(0), xp, yp, opts, rng);
  CHECK(s.epsilon() == 0.0);
  CHECK_FALSE(s.low().has_value());
}
