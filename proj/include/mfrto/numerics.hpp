#pragma once

// Numerical kernels shared by every other module: PSD factorization and
// solves, fixed-step ODE integration, bounded simplex search with multistart,
// and per-dimension standardization.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <utility>

#include "mfrto/errors.hpp"

namespace mfrto {

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Linear algebra

/// Cholesky factor of (A + jitter * I) for a symmetric positive (semi)definite A.
class PsdFactorization {
 public:
  PsdFactorization() = default;

  Eigen::Index dimension() const { return lower_.rows(); }
  const Eigen::MatrixXd& lower() const { return lower_; }
  /// Total diagonal shift that was needed to obtain the factor.
  double jitter() const { return jitter_; }

  /// log det(A + jitter * I).
  double log_determinant() const;

  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& rhs) const;
  /// Column-wise solve for a block of right-hand sides.
  Eigen::MatrixXd solve_columns(const Eigen::Ref<const Eigen::MatrixXd>& rhs) const;

  /// L^{-1} rhs, used for posterior variances.
  Eigen::VectorXd solve_lower(const Eigen::Ref<const Eigen::VectorXd>& rhs) const;

 private:
  friend PsdFactorization factor_psd(const Eigen::Ref<const Eigen::MatrixXd>&, double);
  Eigen::MatrixXd lower_;
  double jitter_ = 0.0;
};

/// Factors (matrix + jitter * I). When the factorization breaks down the
/// shift is escalated from 1e-10 * mean(diag) by factors of ten up to
/// 1e-4 * mean(diag); beyond that NotPositiveDefinite is thrown.
PsdFactorization factor_psd(const Eigen::Ref<const Eigen::MatrixXd>& matrix, double jitter = 0.0);

inline Eigen::VectorXd solve_psd(const PsdFactorization& fact,
                                 const Eigen::Ref<const Eigen::VectorXd>& rhs) {
  return fact.solve(rhs);
}
inline Eigen::MatrixXd solve_psd_columns(const PsdFactorization& fact,
                                         const Eigen::Ref<const Eigen::MatrixXd>& rhs) {
  return fact.solve_columns(rhs);
}

// ---------------------------------------------------------------------------
// Boxes

struct BoxDomain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  BoxDomain() = default;
  BoxDomain(Eigen::VectorXd lo, Eigen::VectorXd hi);

  Eigen::Index dimension() const { return lower.size(); }
  Eigen::VectorXd width() const { return upper - lower; }
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& u, double slack = 0.0) const;
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  Eigen::VectorXd sample(Rng& rng) const;
  /// Intersection with another box; throws OutOfRange if empty.
  BoxDomain intersect(const BoxDomain& other) const;
};

// ---------------------------------------------------------------------------
// ODE integration

/// Inputs held constant over consecutive stages.
struct PiecewiseConstantSchedule {
  Eigen::VectorXd boundaries;  // n_stages + 1 increasing times
  Eigen::MatrixXd inputs;      // n_stages x n_inputs

  Eigen::Index stages() const { return inputs.rows(); }
  /// Index of the stage active on [boundaries(i), boundaries(i+1)).
  Eigen::Index stage_at(double t) const;
};

struct OdeTrajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;  // one row per time point
};

using OdeRhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& state,
                                             const Eigen::VectorXd& inputs)>;

inline constexpr double kDefaultOdeStep = 0.05;

/// Classical fixed-step RK4. Steps never straddle a stage boundary or an
/// output time; each such interval is split into ceil(len / step) equal steps.
OdeTrajectory integrate_ode(const OdeRhs& rhs, const Eigen::VectorXd& x0,
                            const PiecewiseConstantSchedule& schedule,
                            const Eigen::VectorXd& t_grid, double step = kDefaultOdeStep);

// ---------------------------------------------------------------------------
// Derivative-free search

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Minimum {
  Eigen::VectorXd argmin;
  double value = 0.0;
  int evaluations = 0;
};

inline constexpr int kDefaultSearchBudget = 400;

/// Nelder-Mead simplex search with every trial point projected onto the box.
/// Running out of budget is not an error: the best point seen is returned.
Minimum local_minimize(const Objective& objective, const BoxDomain& domain,
                       const Eigen::VectorXd& start, int budget = kDefaultSearchBudget);

/// Best of `n_starts` local searches: the first from `incumbent`, the rest
/// from uniform draws on the box (drawn in order from `rng`).
Minimum multistart_minimize(const Objective& objective, const BoxDomain& domain,
                            const Eigen::VectorXd& incumbent, int n_starts, Rng& rng,
                            int budget_per_start = kDefaultSearchBudget);

// ---------------------------------------------------------------------------
// Standardization

/// Per-column affine map x -> (x - shift) / scale with population standard
/// deviation as scale. Columns without spread keep scale 1.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Eigen::VectorXd shift, Eigen::VectorXd scale);

  static Standardizer fit(const Eigen::Ref<const Eigen::MatrixXd>& samples);
  static Standardizer identity(Eigen::Index dims);

  const Eigen::VectorXd& shift() const { return shift_; }
  const Eigen::VectorXd& scale() const { return scale_; }

  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& samples) const;
  Eigen::MatrixXd invert(const Eigen::Ref<const Eigen::MatrixXd>& samples) const;
  Eigen::VectorXd apply_point(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  Eigen::VectorXd invert_point(const Eigen::Ref<const Eigen::VectorXd>& u) const;

 private:
  Eigen::VectorXd shift_;
  Eigen::VectorXd scale_;
};

}  // namespace mfrto
