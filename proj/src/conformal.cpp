#include "nmfuse/conformal.hpp"

#include "nmfuse/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nmfuse {

ValidationBank::ValidationBank(std::vector<double> statistics) : sorted_(std::move(statistics)) {
  if (sorted_.empty()) throw DataError("validation bank is empty");
  if (!std::all_of(sorted_.begin(), sorted_.end(), [](double v) { return std::isfinite(v); })) {
    throw DataError("validation bank holds non-finite statistics");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

ValidationBank::ValidationBank(const Eigen::Ref<const Eigen::VectorXd>& statistics)
    : ValidationBank(std::vector<double>(statistics.begin(), statistics.end())) {}

Eigen::Index ValidationBank::count_at_or_below(double t) const {
  return std::upper_bound(sorted_.begin(), sorted_.end(), t) - sorted_.begin();
}

void GuaranteeConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1), got " + std::to_string(delta));
}

Probability conformal_p(const ValidationBank& bank, double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("conformal_p: non-finite statistic");
  const auto v = static_cast<double>(bank.size());
  return Probability((1.0 + static_cast<double>(bank.count_at_or_below(t))) / (1.0 + v));
}

BetaShapes beta_far_law(Eigen::Index v, double a) {
  if (v < 1) throw std::invalid_argument("beta_far_law: v must be >= 1");
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("beta_far_law: a must lie in (0, 1)");
  const auto l = static_cast<Eigen::Index>(std::floor(static_cast<double>(v + 1) * a));
  return {l, v + 1 - l};
}

double far_upper_quantile(Eigen::Index v, Eigen::Index l, double delta) {
  return beta_quantile(1.0 - delta, static_cast<double>(l), static_cast<double>(v + 1 - l));
}

namespace {

Threshold make_threshold(Eigen::Index v, Eigen::Index l, double delta) {
  Threshold t;
  t.l = l;
  t.degenerate = l == 0;
  t.a = (static_cast<double>(l) + 0.99) / static_cast<double>(v + 1);
  t.alpha_min = l == 0 ? 0.0 : far_upper_quantile(v, l, delta);
  return t;
}

Eigen::Index interval_of(Eigen::Index v, double a) {
  return static_cast<Eigen::Index>(std::floor(static_cast<double>(v + 1) * a));
}

}  // namespace

Threshold find_threshold(Eigen::Index v, const GuaranteeConfig& g) {
  if (v < 1) throw std::invalid_argument("find_threshold: v must be >= 1");
  g.validate();
  // Invariant: interval(a_min) satisfies the guarantee (l = 0 vacuously),
  // interval(a_max) = v + 1 is beyond every admissible l.
  double a_min = 0.0;
  double a_max = 1.0;
  while (interval_of(v, a_max) - interval_of(v, a_min) > 1) {
    const double a = 0.5 * (a_min + a_max);
    const Eigen::Index l = interval_of(v, a);
    const bool violates = l > v || (l > 0 && far_upper_quantile(v, l, g.delta) > g.alpha);
    if (violates) {
      a_max = a;
    } else {
      a_min = a;
    }
  }
  return make_threshold(v, interval_of(v, a_min), g.delta);
}

Threshold find_threshold_linear(Eigen::Index v, const GuaranteeConfig& g) {
  if (v < 1) throw std::invalid_argument("find_threshold_linear: v must be >= 1");
  g.validate();
  Eigen::Index best = 0;
  for (Eigen::Index l = 1; l <= v; ++l) {
    if (far_upper_quantile(v, l, g.delta) <= g.alpha) best = l;
  }
  return make_threshold(v, best, g.delta);
}

ConformalCalibration calibrate(ValidationBank bank, const GuaranteeConfig& g) {
  const auto threshold = find_threshold(bank.size(), g);
  return {std::move(bank), threshold, g};
}

std::string decision_name(Decision d) { return d == Decision::ood ? "OOD" : "inlier"; }

Decision detect(double t_statistic, const ConformalCalibration& cal) {
  if (cal.threshold.degenerate) return Decision::inlier;
  return conformal_p(cal.bank, t_statistic) <= cal.threshold.a ? Decision::ood : Decision::inlier;
}

Decision fixed_threshold_detect(double t_statistic, double tau) {
  return t_statistic <= tau ? Decision::ood : Decision::inlier;
}

}  // namespace nmfuse
