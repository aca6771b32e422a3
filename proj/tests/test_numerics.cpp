#include <doctest.h>

#include <cmath>

#include "mfrto/errors.hpp"
#include "mfrto/numerics.hpp"
#include "mfrto/plant_models.hpp"
#include "oracles.hpp"

using namespace mfrto;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_spd(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> z;
  MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
  return a * a.transpose() + static_cast<double>(n) * MatrixXd::Identity(n, n);
}

VectorXd random_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> z;
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

}  // namespace

TEST_CASE("factor_psd of the identity is the identity") {
  const auto f = factor_psd(MatrixXd::Identity(3, 3));
  CHECK(f.lower().isApprox(MatrixXd::Identity(3, 3)));
  CHECK(f.jitter() == 0.0);
}

TEST_CASE("factor_psd on a 2x2 matches the hand Cholesky") {
  MatrixXd a(2, 2);
  a << 4, 2, 2, 3;
  const auto f = factor_psd(a);
  CHECK(f.lower()(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(f.lower()(0, 1) == 0.0);
  CHECK(f.lower()(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.lower()(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  const VectorXd x = solve_psd(f, VectorXd::Unit(2, 0));
  CHECK(x(0) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(x(1) == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(f.log_determinant() == doctest::Approx(std::log(8.0)).epsilon(1e-14));
}

TEST_CASE("factor_psd escalates jitter on a singular matrix") {
  const MatrixXd a = MatrixXd::Ones(2, 2);
  const auto f = factor_psd(a);
  CHECK(f.jitter() > 0.0);
  CHECK(f.jitter() <= 1e-4);
  const MatrixXd shifted = a + f.jitter() * MatrixXd::Identity(2, 2);
  CHECK((f.lower() * f.lower().transpose() - shifted).norm() <= 1e-10 * shifted.norm());
  CHECK((f.lower().diagonal().array() > 0.0).all());
}

TEST_CASE("factor_psd gives up beyond the jitter cap") {
  MatrixXd a(2, 2);
  a << 1, 0, 0, -1;
  CHECK_THROWS_AS(factor_psd(a), NotPositiveDefinite);
}

TEST_CASE("factor_psd honours an explicit jitter") {
  const auto f = factor_psd(MatrixXd::Identity(2, 2), 3.0);
  CHECK(f.lower()(0, 0) == doctest::Approx(2.0));
  CHECK(f.jitter() == 3.0);
}

TEST_CASE("solve_psd: identity passes rhs through, dimension mismatch throws") {
  const auto f = factor_psd(MatrixXd::Identity(3, 3));
  const VectorXd b(VectorXd::LinSpaced(3, 1.0, 3.0));
  CHECK(solve_psd(f, b) == b);
  CHECK_THROWS_AS(solve_psd(f, VectorXd::Ones(2)), DimensionMismatch);
  CHECK_THROWS_AS(solve_psd_columns(f, MatrixXd::Ones(4, 2)), DimensionMismatch);
}

TEST_CASE("solve_psd matches a dense inverse on random 5x5 systems") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd a = random_spd(5, rng);
    const VectorXd b = random_vector(5, rng);
    const VectorXd x = solve_psd(factor_psd(a), b);
    const VectorXd oracle_x = a.fullPivLu().inverse() * b;
    CHECK((x - oracle_x).norm() <= 1e-8 * oracle_x.norm());
  }
  const MatrixXd a = random_spd(6, rng);
  const MatrixXd b = MatrixXd::Random(6, 3);
  const MatrixXd x = solve_psd_columns(factor_psd(a), b);
  CHECK((a * x - b).norm() <= 1e-8 * b.norm());
}

TEST_CASE("solve_psd residual stays small up to dimension 200") {
  Rng rng(5);
  for (const Eigen::Index n : {10, 50, 200}) {
    const MatrixXd a = random_spd(n, rng);
    const VectorXd b = random_vector(n, rng);
    const VectorXd x = solve_psd(factor_psd(a), b);
    CHECK((a * x - b).norm() / b.norm() < 1e-8);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("BoxDomain basics") {
  const BoxDomain box(VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));
  CHECK(box.dimension() == 2);
  CHECK(box.contains(VectorXd::Zero(2)));
  CHECK_FALSE(box.contains(VectorXd::Constant(2, 1.5)));
  CHECK(box.project(VectorXd::Constant(2, 3.0)) == VectorXd::Constant(2, 1.0));
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(box.contains(box.sample(rng)));
  const BoxDomain other(VectorXd::Constant(2, 0.5), VectorXd::Constant(2, 4.0));
  const BoxDomain both = box.intersect(other);
  CHECK(both.lower == VectorXd::Constant(2, 0.5));
  CHECK(both.upper == VectorXd::Constant(2, 1.0));
  const BoxDomain far(VectorXd::Constant(2, 2.0), VectorXd::Constant(2, 3.0));
  CHECK_THROWS_AS(box.intersect(far), OutOfRange);
  CHECK_THROWS(BoxDomain(VectorXd::Constant(2, 1.0), VectorXd::Constant(2, 0.0)));
  CHECK_THROWS(BoxDomain(VectorXd::Constant(2, 0.0), VectorXd::Constant(3, 1.0)));
}

// ---------------------------------------------------------------------------

namespace {

PiecewiseConstantSchedule single_stage(double t_end, double input) {
  PiecewiseConstantSchedule s;
  s.boundaries = Eigen::Vector2d(0.0, t_end);
  s.inputs = MatrixXd::Constant(1, 1, input);
  return s;
}

}  // namespace

TEST_CASE("integrate_ode with a zero right-hand side keeps the state") {
  const OdeRhs zero = [](double, const VectorXd& x, const VectorXd&) {
    return VectorXd::Zero(x.size()).eval();
  };
  const VectorXd x0 = Eigen::Vector3d(1, 2, 3);
  const VectorXd grid = VectorXd::LinSpaced(5, 0.0, 4.0);
  const auto traj = integrate_ode(zero, x0, single_stage(4.0, 0.0), grid);
  REQUIRE(traj.states.rows() == 5);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(traj.states.row(i).transpose() == x0);
  CHECK(traj.times(0) == 0.0);
  CHECK(traj.times(4) == 4.0);
}

TEST_CASE("integrate_ode reproduces constant inflow exactly") {
  const OdeRhs inflow = [](double, const VectorXd&, const VectorXd& u) { return VectorXd(u); };
  const auto traj = integrate_ode(inflow, VectorXd::Constant(1, 150.0), single_stage(10.0, 40.0),
                                  Eigen::Vector2d(0.0, 10.0));
  CHECK(traj.states(1, 0) == doctest::Approx(550.0).epsilon(1e-12));
}

TEST_CASE("integrate_ode switches inputs exactly at stage boundaries") {
  PiecewiseConstantSchedule s;
  s.boundaries = Eigen::Vector3d(0.0, 1.03, 2.0);
  s.inputs = Eigen::Vector2d(1.0, -2.0);
  const OdeRhs rhs = [](double, const VectorXd&, const VectorXd& u) { return VectorXd(u); };
  const auto traj = integrate_ode(rhs, VectorXd::Zero(1), s, Eigen::Vector3d(0.0, 1.03, 2.0));
  CHECK(traj.states(1, 0) == doctest::Approx(1.03).epsilon(1e-12));
  CHECK(traj.states(2, 0) == doctest::Approx(1.03 - 2.0 * 0.97).epsilon(1e-12));
}

TEST_CASE("integrate_ode matches exponential decay") {
  const OdeRhs decay = [](double, const VectorXd& x, const VectorXd&) { return VectorXd(-0.3 * x); };
  const auto traj = integrate_ode(decay, VectorXd::Constant(1, 2.0), single_stage(10.0, 0.0),
                                  Eigen::Vector2d(0.0, 10.0));
  CHECK(traj.states(1, 0) == doctest::Approx(2.0 * std::exp(-3.0)).epsilon(1e-9));
}

TEST_CASE("integrate_ode flags blow-up") {
  const OdeRhs blow = [](double, const VectorXd& x, const VectorXd&) {
    return VectorXd(x.array().square() * 1e3);
  };
  CHECK_THROWS_AS(integrate_ode(blow, VectorXd::Constant(1, 10.0), single_stage(100.0, 0.0),
                                Eigen::Vector2d(0.0, 100.0)),
                  NonFiniteState);
}

TEST_CASE("integrate_ode agrees with an independent fine-step RK4 on the photobioreactor") {
  const PbrParameters p = load_pbr_parameters(MFRTO_SOURCE_DIR "/data/pbr_parameters.json");
  const oracle::Kinetics k{p.u_m, p.u_d, p.k_s, p.k_i, p.k_sq, p.k_iq, p.k_m, p.k_d, p.K_N, p.K_Np, p.Y_NX};
  const ControlSchedule sched = ControlSchedule::constant(260.0, 20.0);
  Rng rng(0);
  NoiseSpec quiet;
  quiet.enabled = false;
  const BatchOutcome out = evaluate_batch(sched, Fidelity::Plant, quiet, p, rng);
  const auto f = [&](const VectorXd& x, int) {
    return VectorXd(oracle::plant_rates(k, x(0), x(1), x(2), 260.0, 20.0));
  };
  const VectorXd fine = oracle::rk4(f, Eigen::Vector3d(1.0, 150.0, 0.0), 40.0, 6, 8000);
  const VectorXd end = out.trajectory.states.bottomRows(1).transpose();
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(end(i) - fine(i)) <= 1e-6 * std::abs(fine(i)));
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("local_minimize finds quadratic minima") {
  const BoxDomain box(VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));
  const Objective sq = [](const VectorXd& u) { return u.squaredNorm(); };
  const Minimum m = local_minimize(sq, box, Eigen::Vector2d(0.5, 0.5));
  CHECK(m.value < 1e-6);
  CHECK(m.argmin.norm() < 1e-3);

  const Objective shifted = [](const VectorXd& u) {
    return std::pow(u(0) - 0.3, 2) + std::pow(u(1) + 0.2, 2);
  };
  const Minimum s = local_minimize(shifted, box, Eigen::Vector2d(0.5, 0.5));
  CHECK(s.argmin(0) == doctest::Approx(0.3).epsilon(1e-3));
  CHECK(s.argmin(1) == doctest::Approx(-0.2).epsilon(1e-3));
}

TEST_CASE("local_minimize descends on Rosenbrock and stays in the box") {
  const BoxDomain box(VectorXd::Constant(2, -2.0), VectorXd::Constant(2, 2.0));
  const Objective rosen = [](const VectorXd& u) {
    return 100.0 * std::pow(u(1) - u(0) * u(0), 2) + std::pow(1.0 - u(0), 2);
  };
  const VectorXd start = Eigen::Vector2d(-1.0, 1.0);
  const Minimum m = local_minimize(rosen, box, start);
  CHECK(m.value < rosen(start));
  CHECK(box.contains(m.argmin));
  CHECK(m.evaluations <= kDefaultSearchBudget);
}

TEST_CASE("local_minimize respects a bound-active minimum") {
  const BoxDomain box(VectorXd::Constant(1, 0.0), VectorXd::Constant(1, 1.0));
  const Objective lin = [](const VectorXd& u) { return -u(0); };
  const Minimum m = local_minimize(lin, box, VectorXd::Constant(1, 0.2));
  CHECK(m.argmin(0) == doctest::Approx(1.0));
}

TEST_CASE("multistart_minimize finds the global minimum of x sin(x) on [0, 12]") {
  // Dense 1e-4 grid scan is the reference.
  double best_x = 0.0, best_f = 1e300;
  for (int i = 0; i <= 120000; ++i) {
    const double x = i * 1e-4;
    const double f = x * std::sin(x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  CHECK(std::abs(best_x - 11.0855) < 2e-4);
  CHECK(std::abs(best_f - (-11.040708)) < 1e-6);

  const BoxDomain box(VectorXd::Constant(1, 0.0), VectorXd::Constant(1, 12.0));
  const Objective f = [](const VectorXd& u) { return u(0) * std::sin(u(0)); };
  Rng rng(2);
  const Minimum m = multistart_minimize(f, box, VectorXd::Constant(1, 1.0), 20, rng);
  CHECK(std::abs(m.argmin(0) - best_x) < 1e-2);
  CHECK(std::abs(m.value - best_f) < 1e-2);
}

TEST_CASE("multistart_minimize with one start equals a single local search") {
  const BoxDomain box(VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));
  const Objective f = [](const VectorXd& u) { return std::pow(u(0) - 0.1, 2) + 3 * std::pow(u(1), 2); };
  Rng rng(9);
  const VectorXd start = Eigen::Vector2d(0.7, -0.4);
  const Minimum multi = multistart_minimize(f, box, start, 1, rng);
  const Minimum single = local_minimize(f, box, start);
  CHECK(multi.argmin == single.argmin);
  CHECK(multi.value == single.value);

  Rng rng2(9);
  const Minimum many = multistart_minimize(f, box, start, 10, rng2);
  CHECK((many.argmin - single.argmin).norm() < 1e-3);
}

// ---------------------------------------------------------------------------

TEST_CASE("Standardizer conventions") {
  const Standardizer s = Standardizer::fit(Eigen::Vector2d(0.0, 2.0));
  CHECK(s.shift()(0) == 1.0);
  CHECK(s.scale()(0) == 1.0);

  MatrixXd c(3, 2);
  c << 5, 1, 5, 2, 5, 3;
  const Standardizer t = Standardizer::fit(c);
  CHECK(t.scale()(0) == 1.0);
  CHECK(t.apply(c).col(0).isZero());

  Rng rng(4);
  MatrixXd r(20, 3);
  std::normal_distribution<double> z(3.0, 7.0);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = z(rng);
  const Standardizer u = Standardizer::fit(r);
  const MatrixXd a = u.apply(r);
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(std::abs(a.col(j).mean()) < 1e-12);
    CHECK(std::sqrt(a.col(j).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK((u.invert(a) - r).cwiseAbs().maxCoeff() <= 1e-12 * r.cwiseAbs().maxCoeff());
  const VectorXd p = r.row(3).transpose();
  CHECK((u.invert_point(u.apply_point(p)) - p).norm() < 1e-12);
}
