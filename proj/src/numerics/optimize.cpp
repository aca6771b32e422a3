#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mfrto/numerics.hpp"

namespace mfrto {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;
constexpr double kInitialStep = 0.1;  // fraction of box width

// Wraps the objective with box projection, NaN handling and best tracking.
class Evaluator {
 public:
  Evaluator(const Objective& f, const BoxDomain& box, int budget)
      : f_(f), box_(box), budget_(budget) {}

  double operator()(Eigen::VectorXd& u) {
    u = box_.project(u);
    double v = f_(u);
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    ++count_;
    if (count_ == 1 || v < best_value_) {
      best_value_ = v;
      best_ = u;
    }
    return v;
  }

  bool exhausted() const { return count_ >= budget_; }
  int count() const { return count_; }
  const Eigen::VectorXd& best() const { return best_; }
  double best_value() const { return best_value_; }

 private:
  const Objective& f_;
  const BoxDomain& box_;
  int budget_;
  int count_ = 0;
  Eigen::VectorXd best_;
  double best_value_ = std::numeric_limits<double>::infinity();
};

}  // namespace

Minimum local_minimize(const Objective& objective, const BoxDomain& domain,
                       const Eigen::VectorXd& start, int budget) {
  const Eigen::Index n = domain.dimension();
  if (start.size() != n) throw DimensionMismatch("local_minimize: start dimension mismatch");
  if (budget < 1) budget = 1;

  Evaluator eval(objective, domain, budget);
  const Eigen::VectorXd width = domain.width();

  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1));
  std::vector<double> fvals(static_cast<std::size_t>(n + 1));
  simplex[0] = start;
  fvals[0] = eval(simplex[0]);
  for (Eigen::Index i = 0; i < n && !eval.exhausted(); ++i) {
    Eigen::VectorXd v = simplex[0];
    const double h = kInitialStep * width(i);
    v(i) = (v(i) + h <= domain.upper(i)) ? v(i) + h : v(i) - h;
    simplex[static_cast<std::size_t>(i + 1)] = v;
    fvals[static_cast<std::size_t>(i + 1)] = eval(simplex[static_cast<std::size_t>(i + 1)]);
  }
  if (eval.exhausted()) return {eval.best(), eval.best_value(), eval.count()};

  std::vector<std::size_t> order(static_cast<std::size_t>(n + 1));
  const double scale_ref = std::max(width.maxCoeff(), 1e-300);

  while (!eval.exhausted()) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fvals[a] < fvals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    // Converged: flat values on a collapsed simplex.
    double diameter = 0.0;
    for (const auto& v : simplex) {
      diameter = std::max(diameter, (v - simplex[best]).lpNorm<Eigen::Infinity>());
    }
    const double spread = fvals[worst] - fvals[best];
    if (diameter <= 1e-10 * scale_ref &&
        spread <= 1e-14 * (1.0 + std::abs(fvals[best]))) {
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    Eigen::VectorXd reflected = centroid + kReflect * (centroid - simplex[worst]);
    const double f_r = eval(reflected);
    if (f_r < fvals[best]) {
      if (eval.exhausted()) {
        simplex[worst] = reflected;
        fvals[worst] = f_r;
        break;
      }
      Eigen::VectorXd expanded = centroid + kExpand * (reflected - centroid);
      const double f_e = eval(expanded);
      if (f_e < f_r) {
        simplex[worst] = expanded;
        fvals[worst] = f_e;
      } else {
        simplex[worst] = reflected;
        fvals[worst] = f_r;
      }
      continue;
    }
    if (f_r < fvals[second]) {
      simplex[worst] = reflected;
      fvals[worst] = f_r;
      continue;
    }
    if (eval.exhausted()) break;

    const bool outside = f_r < fvals[worst];
    Eigen::VectorXd contracted = outside ? Eigen::VectorXd(centroid + kContract * (reflected - centroid))
                                         : Eigen::VectorXd(centroid + kContract * (simplex[worst] - centroid));
    const double f_c = eval(contracted);
    if (f_c < std::min(f_r, fvals[worst])) {
      simplex[worst] = contracted;
      fvals[worst] = f_c;
      continue;
    }

    for (std::size_t i = 0; i < simplex.size() && !eval.exhausted(); ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + kShrink * (simplex[i] - simplex[best]);
      fvals[i] = eval(simplex[i]);
    }
  }
  return {eval.best(), eval.best_value(), eval.count()};
}

Minimum multistart_minimize(const Objective& objective, const BoxDomain& domain,
                            const Eigen::VectorXd& incumbent, int n_starts, Rng& rng,
                            int budget_per_start) {
  if (n_starts < 1) throw OutOfRange("multistart_minimize: n_starts must be >= 1");
  std::vector<Eigen::VectorXd> starts;
  starts.reserve(static_cast<std::size_t>(n_starts));
  starts.push_back(domain.project(incumbent));
  for (int s = 1; s < n_starts; ++s) starts.push_back(domain.sample(rng));

  Minimum best;
  int total = 0;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    Minimum m = local_minimize(objective, domain, starts[s], budget_per_start);
    total += m.evaluations;
    if (s == 0 || m.value < best.value) best = std::move(m);
  }
  best.evaluations = total;
  return best;
}

}  // namespace mfrto
