#pragma once

// Distributionally robust handling of probabilistic constraints: for any
// distribution with mean mu and variance s2, mu + r * sqrt(s2) <= 0 with
// r = sqrt((1 - alpha) / alpha) guarantees P(q <= 0) >= 1 - alpha.

#include <optional>

#include "mfrto/gp.hpp"

namespace mfrto {

/// r = sqrt((1 - alpha) / alpha). Throws OutOfRange unless 0 < alpha < 1.
double cantelli_multiplier(double alpha);

class RiskSpec {
 public:
  /// `multiplier_override` replaces the derived multiplier with a tuning
  /// value; the probabilistic guarantee no longer applies when it is set.
  explicit RiskSpec(double alpha, std::optional<double> multiplier_override = std::nullopt);

  double alpha() const { return alpha_; }
  double multiplier() const { return multiplier_; }
  bool overridden() const { return overridden_; }

 private:
  double alpha_;
  double multiplier_;
  bool overridden_;
};

/// mean + r * sqrt(variance); the constraint holds robustly iff this is <= 0.
double robust_constraint_value(const Posterior& post, double r);

}  // namespace mfrto
