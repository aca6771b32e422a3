#include "mfrto/chance.hpp"

#include <cmath>
#include <string>

namespace mfrto {

double cantelli_multiplier(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw OutOfRange("cantelli_multiplier: alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
  return std::sqrt((1.0 - alpha) / alpha);
}

RiskSpec::RiskSpec(double alpha, std::optional<double> multiplier_override)
    : alpha_(alpha),
      multiplier_(cantelli_multiplier(alpha)),
      overridden_(multiplier_override.has_value()) {
  if (multiplier_override) {
    if (!(*multiplier_override >= 0.0)) throw OutOfRange("RiskSpec: multiplier must be >= 0");
    multiplier_ = *multiplier_override;
  }
}

double robust_constraint_value(const Posterior& post, double r) {
  return post.mean + r * std::sqrt(std::max(0.0, post.variance));
}

}  // namespace mfrto
