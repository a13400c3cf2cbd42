#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace nmfuse {

class RngStream;

// A real number in [0, 1]. Construction validates the range; reading it back
// is implicit so probabilities compose with ordinary arithmetic.
class Probability {
 public:
  constexpr Probability() = default;
  explicit Probability(double value);

  constexpr double value() const noexcept { return value_; }
  constexpr operator double() const noexcept { return value_; }

 private:
  double value_ = 0.0;
};

// Standard normal cdf. Throws std::invalid_argument on non-finite input.
Probability std_normal_cdf(double x);

// Standard normal density.
double std_normal_pdf(double x);

// Inverse of std_normal_cdf on the open interval (0, 1). Exactly odd:
// std_normal_quantile(1 - p) == -std_normal_quantile(p) whenever 1 - p is
// representable. Throws std::domain_error for p outside (0, 1).
double std_normal_quantile(double p);

// ln B(a, b).
double log_beta(double a, double b);

// Regularized incomplete beta I_x(a, b), i.e. the Beta(a, b) cdf at x.
Probability beta_cdf(double x, double a, double b);

// Beta(a, b) density at x in (0, 1).
double beta_pdf(double x, double a, double b);

/// Quantile of Beta(alpha_shape, beta_shape): returns x with
/// beta_cdf(x) == p to within 1e-10.
///
/// alpha_shape == 0 is the point mass at zero; it is rejected with
/// std::domain_error so that callers handle the degenerate case explicitly.
/// Other non-positive shapes throw std::invalid_argument.
Probability beta_quantile(double p, double alpha_shape, double beta_shape);

/// Draws mean + cov_chol * w for w i.i.d. standard normal from rng.
///
/// cov_chol must be square, lower triangular and of matching dimension.
Eigen::VectorXd sample_gaussian_vector(const Eigen::Ref<const Eigen::VectorXd>& mean,
                                       const Eigen::Ref<const Eigen::MatrixXd>& cov_chol,
                                       RngStream& rng);

}  // namespace nmfuse
