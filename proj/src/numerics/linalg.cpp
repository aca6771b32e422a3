#include <cmath>
#include <string>

#include "mfrto/numerics.hpp"

namespace mfrto {

namespace {

bool try_cholesky(const Eigen::Ref<const Eigen::MatrixXd>& matrix, double shift,
                  Eigen::MatrixXd& lower) {
  Eigen::MatrixXd shifted = matrix;
  shifted.diagonal().array() += shift;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  const auto diag = lower.diagonal().array();
  return diag.allFinite() && (diag > 0.0).all();
}

}  // namespace

PsdFactorization factor_psd(const Eigen::Ref<const Eigen::MatrixXd>& matrix, double jitter) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw DimensionMismatch("factor_psd: matrix must be square and non-empty, got " +
                            std::to_string(matrix.rows()) + "x" + std::to_string(matrix.cols()));
  }
  if (!(jitter >= 0.0)) throw OutOfRange("factor_psd: jitter must be nonnegative");

  PsdFactorization fact;
  if (try_cholesky(matrix, jitter, fact.lower_)) {
    fact.jitter_ = jitter;
    return fact;
  }

  double mean_diag = matrix.diagonal().mean();
  if (!(mean_diag > 0.0)) mean_diag = 1.0;
  const double cap = 1e-4 * mean_diag;
  for (double extra = 1e-10 * mean_diag; extra <= cap * (1.0 + 1e-12); extra *= 10.0) {
    if (try_cholesky(matrix, jitter + extra, fact.lower_)) {
      fact.jitter_ = jitter + extra;
      return fact;
    }
  }
  throw NotPositiveDefinite("factor_psd: factorization failed after jitter escalation to " +
                            std::to_string(cap));
}

double PsdFactorization::log_determinant() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

Eigen::VectorXd PsdFactorization::solve(const Eigen::Ref<const Eigen::VectorXd>& rhs) const {
  if (rhs.size() != lower_.rows()) {
    throw DimensionMismatch("solve_psd: rhs has " + std::to_string(rhs.size()) +
                            " rows, factor has " + std::to_string(lower_.rows()));
  }
  Eigen::VectorXd x = lower_.triangularView<Eigen::Lower>().solve(rhs);
  lower_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

Eigen::MatrixXd PsdFactorization::solve_columns(const Eigen::Ref<const Eigen::MatrixXd>& rhs) const {
  if (rhs.rows() != lower_.rows()) {
    throw DimensionMismatch("solve_psd: rhs has " + std::to_string(rhs.rows()) +
                            " rows, factor has " + std::to_string(lower_.rows()));
  }
  Eigen::MatrixXd x = lower_.triangularView<Eigen::Lower>().solve(rhs);
  lower_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

Eigen::VectorXd PsdFactorization::solve_lower(const Eigen::Ref<const Eigen::VectorXd>& rhs) const {
  if (rhs.size() != lower_.rows()) throw DimensionMismatch("solve_lower: dimension mismatch");
  return lower_.triangularView<Eigen::Lower>().solve(rhs);
}

// ---------------------------------------------------------------------------

BoxDomain::BoxDomain(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw DimensionMismatch("BoxDomain: bound sizes differ");
  if ((lower.array() > upper.array()).any()) throw OutOfRange("BoxDomain: lower > upper");
}

bool BoxDomain::contains(const Eigen::Ref<const Eigen::VectorXd>& u, double slack) const {
  if (u.size() != lower.size()) return false;
  return ((u.array() >= lower.array() - slack) && (u.array() <= upper.array() + slack)).all();
}

Eigen::VectorXd BoxDomain::project(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  return u.cwiseMax(lower).cwiseMin(upper);
}

Eigen::VectorXd BoxDomain::sample(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd u(lower.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = lower(i) + unit(rng) * (upper(i) - lower(i));
  return u;
}

BoxDomain BoxDomain::intersect(const BoxDomain& other) const {
  if (other.dimension() != dimension()) throw DimensionMismatch("BoxDomain::intersect");
  Eigen::VectorXd lo = lower.cwiseMax(other.lower);
  Eigen::VectorXd hi = upper.cwiseMin(other.upper);
  if ((lo.array() > hi.array()).any()) throw OutOfRange("BoxDomain::intersect: empty");
  return BoxDomain(std::move(lo), std::move(hi));
}

// ---------------------------------------------------------------------------

Standardizer::Standardizer(Eigen::VectorXd shift, Eigen::VectorXd scale)
    : shift_(std::move(shift)), scale_(std::move(scale)) {
  if (shift_.size() != scale_.size()) throw DimensionMismatch("Standardizer: size mismatch");
}

Standardizer Standardizer::fit(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  const Eigen::Index n = samples.rows();
  if (n == 0) throw OutOfRange("Standardizer::fit: no samples");
  Eigen::VectorXd shift = samples.colwise().mean().transpose();
  Eigen::VectorXd scale(samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const double var =
        (samples.col(j).array() - shift(j)).square().sum() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    // Spread at round-off level of the column magnitude counts as constant.
    const double tiny = 1e-12 * std::max(1.0, std::abs(shift(j)));
    scale(j) = (sd > tiny && std::isfinite(sd)) ? sd : 1.0;
  }
  return Standardizer(std::move(shift), std::move(scale));
}

Standardizer Standardizer::identity(Eigen::Index dims) {
  return Standardizer(Eigen::VectorXd::Zero(dims), Eigen::VectorXd::Ones(dims));
}

Eigen::MatrixXd Standardizer::apply(const Eigen::Ref<const Eigen::MatrixXd>& samples) const {
  if (samples.cols() != shift_.size()) throw DimensionMismatch("Standardizer::apply");
  return (samples.rowwise() - shift_.transpose()).array().rowwise() / scale_.transpose().array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::Ref<const Eigen::MatrixXd>& samples) const {
  if (samples.cols() != shift_.size()) throw DimensionMismatch("Standardizer::invert");
  Eigen::MatrixXd out = samples.array().rowwise() * scale_.transpose().array();
  return out.rowwise() + shift_.transpose();
}

Eigen::VectorXd Standardizer::apply_point(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  if (u.size() != shift_.size()) throw DimensionMismatch("Standardizer::apply_point");
  return (u - shift_).cwiseQuotient(scale_);
}

Eigen::VectorXd Standardizer::invert_point(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  if (u.size() != shift_.size()) throw DimensionMismatch("Standardizer::invert_point");
  return u.cwiseProduct(scale_) + shift_;
}

}  // namespace mfrto
