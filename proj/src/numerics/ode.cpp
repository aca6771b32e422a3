#include <algorithm>
#include <cmath>
#include <vector>

#include "mfrto/numerics.hpp"

namespace mfrto {

Eigen::Index PiecewiseConstantSchedule::stage_at(double t) const {
  const Eigen::Index n = stages();
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (t < boundaries(i + 1)) return i;
  }
  return n - 1;
}

namespace {

void check_finite(const Eigen::VectorXd& x, double t) {
  if (!x.allFinite()) {
    throw NonFiniteState("integrate_ode: non-finite state at t = " + std::to_string(t));
  }
}

}  // namespace

OdeTrajectory integrate_ode(const OdeRhs& rhs, const Eigen::VectorXd& x0,
                            const PiecewiseConstantSchedule& schedule,
                            const Eigen::VectorXd& t_grid, double step) {
  const Eigen::Index n_out = t_grid.size();
  if (n_out == 0) throw OutOfRange("integrate_ode: empty output grid");
  if (!(step > 0.0)) throw OutOfRange("integrate_ode: step must be positive");
  for (Eigen::Index i = 1; i < n_out; ++i) {
    if (!(t_grid(i) > t_grid(i - 1))) throw OutOfRange("integrate_ode: t_grid not increasing");
  }
  if (schedule.stages() == 0 || schedule.boundaries.size() != schedule.stages() + 1) {
    throw DimensionMismatch("integrate_ode: schedule needs n_stages + 1 boundaries");
  }
  const double t0 = t_grid(0);
  const double tf = t_grid(n_out - 1);
  if (schedule.boundaries(0) > t0 || schedule.boundaries(schedule.stages()) < tf) {
    throw OutOfRange("integrate_ode: schedule does not cover the output grid");
  }

  // Breakpoints: output times plus stage boundaries strictly inside (t0, tf).
  std::vector<double> breaks(t_grid.data(), t_grid.data() + n_out);
  for (Eigen::Index i = 1; i < schedule.stages(); ++i) {
    const double b = schedule.boundaries(i);
    if (b > t0 && b < tf) breaks.push_back(b);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  OdeTrajectory traj;
  traj.times = t_grid;
  traj.states.resize(n_out, x0.size());

  Eigen::VectorXd x = x0;
  check_finite(x, t0);
  traj.states.row(0) = x.transpose();
  Eigen::Index next_out = 1;

  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double a = breaks[b];
    const double e = breaks[b + 1];
    const Eigen::VectorXd inputs = schedule.inputs.row(schedule.stage_at(a)).transpose();
    const auto n_steps = static_cast<long>(std::ceil((e - a) / step - 1e-9));
    const double h = (e - a) / static_cast<double>(std::max(1L, n_steps));
    for (long s = 0; s < std::max(1L, n_steps); ++s) {
      const double t = a + static_cast<double>(s) * h;
      const Eigen::VectorXd k1 = rhs(t, x, inputs);
      const Eigen::VectorXd k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1, inputs);
      const Eigen::VectorXd k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2, inputs);
      const Eigen::VectorXd k4 = rhs(t + h, x + h * k3, inputs);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      check_finite(x, t + h);
    }
    while (next_out < n_out && t_grid(next_out) <= e) {
      traj.states.row(next_out) = x.transpose();
      ++next_out;
    }
  }
  return traj;
}

}  // namespace mfrto
