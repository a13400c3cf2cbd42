#pragma once

// Finite-sample false-alarm control for a detector that rejects the inlier
// hypothesis when its statistic is small.
//
// With a size-v validation bank drawn from inliers, the conformal p-value of a
// statistic t is q(t) = (1 + #{t_i <= t}) / (1 + v). The detector
// "q(t) <= a" has a realized false-alarm rate that, over the randomness of the
// bank, follows Beta(l, v + 1 - l) with l = floor((v + 1) a). Calibration
// picks the largest l whose (1 - delta)-quantile stays below the target
// alpha.

#include "nmfuse/numerics.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace nmfuse {

class ValidationBank {
 public:
  // Sorts a copy. Throws DataError if empty or non-finite.
  explicit ValidationBank(std::vector<double> statistics);
  explicit ValidationBank(const Eigen::Ref<const Eigen::VectorXd>& statistics);

  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(sorted_.size()); }
  std::span<const double> sorted() const noexcept { return sorted_; }

  // Number of bank statistics <= t.
  Eigen::Index count_at_or_below(double t) const;

  bool operator==(const ValidationBank&) const = default;

 private:
  std::vector<double> sorted_;
};

struct GuaranteeConfig {
  double alpha = 0.05;
  double delta = 0.1;

  // Throws ConfigError unless both lie strictly inside (0, 1).
  void validate() const;
};

struct BetaShapes {
  Eigen::Index alpha_shape = 0;
  Eigen::Index beta_shape = 0;
  // alpha_shape == 0: the detector never rejects.
  bool degenerate() const noexcept { return alpha_shape == 0; }
};

struct Threshold {
  double a = 0.0;
  Eigen::Index l = 0;
  double alpha_min = 0.0;
  // l == 0: even the smallest nonzero threshold breaks the guarantee, so the
  // calibrated detector never rejects.
  bool degenerate = true;
};

struct ConformalCalibration {
  ValidationBank bank;
  Threshold threshold;
  GuaranteeConfig guarantee;
};

// Throws DataError on an empty bank, std::invalid_argument for non-finite t.
Probability conformal_p(const ValidationBank& bank, double t);

// (floor((v+1) a), v + 1 - floor((v+1) a)).
BetaShapes beta_far_law(Eigen::Index v, double a);

// The (1 - delta)-quantile of the realized false-alarm rate for interval l.
double far_upper_quantile(Eigen::Index v, Eigen::Index l, double delta);

/// Bisection over a in (0, 1) on the interval index l = floor((v + 1) a).
/// Returns the largest l in {1, ..., v} with
///   beta_quantile(1 - delta, l, v + 1 - l) <= alpha,
/// a = (l + 0.99) / (v + 1) and alpha_min equal to that quantile. When no l
/// qualifies the result is the degenerate never-reject threshold.
Threshold find_threshold(Eigen::Index v, const GuaranteeConfig& g);

// Exhaustive scan over l; same contract as find_threshold.
Threshold find_threshold_linear(Eigen::Index v, const GuaranteeConfig& g);

ConformalCalibration calibrate(ValidationBank bank, const GuaranteeConfig& g);

enum class Decision { inlier, ood };
std::string decision_name(Decision d);

// OOD iff conformal_p(bank, t) <= a.
Decision detect(double t_statistic, const ConformalCalibration& cal);

// OOD iff t <= tau (inclusive). tau = -infinity never rejects.
Decision fixed_threshold_detect(double t_statistic, double tau);

}  // namespace nmfuse
