#include "nmfuse/numerics.hpp"

#include "nmfuse/errors.hpp"
#include "nmfuse/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nmfuse {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kSqrt2Pi = 2.50662827463100050242;

// Rational initializer for the normal quantile, relative error ~1.2e-9
// (P. J. Acklam). Refined by Halley steps below.
double acklam_quantile(double p) {
  static constexpr std::array<double, 6> a = {-3.969683028665376e+01, 2.209460984245205e+02,
                                              -2.759285104469687e+02, 1.383577518672690e+02,
                                              -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b = {-5.447609879822406e+01, 1.615858368580409e+02,
                                              -1.556989798598866e+02, 6.680131188771972e+01,
                                              -1.328068155288572e+01};
  static constexpr std::array<double, 6> c = {-7.784894002430293e-03, -3.223964580411365e-01,
                                              -2.400758277161838e+00, -2.549732539343734e+00,
                                              4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d = {7.784695709041462e-03, 3.224671290700398e-01,
                                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Lower-half quantile, p in (0, 0.5].
double lower_quantile(double p) {
  double x = acklam_quantile(p);
  for (int step = 0; step < 2; ++step) {
    const double err = 0.5 * std::erfc(-x * kInvSqrt2) - p;
    const double u = err * kSqrt2Pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge", std::abs(h));
}

void check_shapes(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || !(b > 0.0)) {
    throw std::invalid_argument("beta shapes must be finite and positive");
  }
  if (a == 0.0) throw std::domain_error("Beta(0, b) is degenerate (point mass at 0)");
}

}  // namespace

Probability::Probability(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument("probability out of [0, 1]: " + std::to_string(value));
  }
}

Probability std_normal_cdf(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("std_normal_cdf: non-finite argument");
  return Probability(0.5 * std::erfc(-x * kInvSqrt2));
}

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("std_normal_quantile: p must lie in (0, 1), got " + std::to_string(p));
  }
  if (p == 0.5) return 0.0;
  if (p < 0.5) return lower_quantile(p);
  // 1 - p is exact for p in [0.5, 1].
  return -lower_quantile(1.0 - p);
}

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

Probability beta_cdf(double x, double a, double b) {
  check_shapes(a, b);
  if (std::isnan(x)) throw std::invalid_argument("beta_cdf: NaN argument");
  if (x <= 0.0) return Probability(0.0);
  if (x >= 1.0) return Probability(1.0);
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  double value = 0.0;
  if (x < a / (a + b)) {
    value = std::exp(log_front) * beta_continued_fraction(x, a, b) / a;
  } else {
    value = 1.0 - std::exp(log_front) * beta_continued_fraction(1.0 - x, b, a) / b;
  }
  return Probability(std::clamp(value, 0.0, 1.0));
}

double beta_pdf(double x, double a, double b) {
  check_shapes(a, b);
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b));
}

Probability beta_quantile(double p, double alpha_shape, double beta_shape) {
  check_shapes(alpha_shape, beta_shape);
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("beta_quantile: p must lie in (0, 1)");

  // Bracketed Newton: keep [lo, hi] with cdf(lo) < p < cdf(hi); a Newton step
  // that leaves the bracket or stalls falls back to bisection.
  double lo = 0.0;
  double hi = 1.0;
  double x = alpha_shape / (alpha_shape + beta_shape);
  for (int iter = 0; iter < 400; ++iter) {
    const double f = beta_cdf(x, alpha_shape, beta_shape) - p;
    if (std::abs(f) <= 1e-14) break;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (std::nextafter(lo, hi) >= hi) break;
    const double density = beta_pdf(x, alpha_shape, beta_shape);
    double next = density > 0.0 ? x - f / density : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return Probability(x);
}

Eigen::VectorXd sample_gaussian_vector(const Eigen::Ref<const Eigen::VectorXd>& mean,
                                       const Eigen::Ref<const Eigen::MatrixXd>& cov_chol,
                                       RngStream& rng) {
  const Eigen::Index m = mean.size();
  if (cov_chol.rows() != m || cov_chol.cols() != m) {
    throw std::invalid_argument("sample_gaussian_vector: cov_chol must be " + std::to_string(m) + "x" +
                                std::to_string(m));
  }
  for (Eigen::Index j = 1; j < m; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      if (cov_chol(i, j) != 0.0) throw std::invalid_argument("sample_gaussian_vector: cov_chol is not lower triangular");
    }
  }
  Eigen::VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) w[i] = rng.normal();
  return mean + cov_chol.triangularView<Eigen::Lower>() * w;
}

}  // namespace nmfuse
