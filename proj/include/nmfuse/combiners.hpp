#pragma once

// Score-combining statistics. Every statistic is oriented so that larger
// values indicate a more inlier-like sample; a detector rejects the inlier
// hypothesis when the statistic falls at or below a threshold.
//
// The z-vector combiners take standard-normal z-values. The p-value combiners
// take left-tail inlier p-values q_l = Pr{s_l(X) <= s_l(x) | inlier}, so small
// q_l is evidence against the inlier hypothesis.

#include "nmfuse/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmfuse {

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* who) {
  if (v.size() == 0) throw std::invalid_argument(std::string(who) + ": empty input");
  if (!v.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

template <typename Derived>
void require_open_unit(const Eigen::MatrixBase<Derived>& q, const char* who, bool allow_one) {
  if (q.size() == 0) throw std::invalid_argument(std::string(who) + ": empty input");
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const auto x = q[i];
    const bool ok = x > 0 && (allow_one ? x <= 1 : x < 1);
    if (!ok) {
      throw std::domain_error(std::string(who) + ": p-value " + std::to_string(static_cast<double>(x)) +
                              " outside the admissible range");
    }
  }
}

template <typename Derived>
std::vector<typename Derived::Scalar> sorted_copy(const Eigen::MatrixBase<Derived>& v) {
  std::vector<typename Derived::Scalar> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i];
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// z-vector statistics

struct GlrtConfig {
  double epsilon = 0.25;

  void validate() const {
    if (!std::isfinite(epsilon) || epsilon < 0.0) {
      throw std::invalid_argument("GLRT margin epsilon must be finite and >= 0");
    }
  }
};

/// Projection of z onto {mu : mu_l <= -epsilon} in the Euclidean metric,
/// i.e. the constrained maximum-likelihood mean under the alternative.
template <typename Derived>
auto clamp_to_negative_means(const Eigen::MatrixBase<Derived>& z, typename Derived::Scalar epsilon) {
  return z.array().min(-epsilon).matrix();
}

/// Log generalized likelihood ratio of N(0, I) against the best
/// N(mu, I) with every mu_l <= -epsilon:
///   t = sum_l (z_l^- / 2 - z_l) z_l^-,   z_l^- = min(z_l, -epsilon).
template <typename Derived>
typename Derived::Scalar glrt_statistic(const Eigen::MatrixBase<Derived>& z, const GlrtConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  cfg.validate();
  detail::require_finite(z, "glrt_statistic");
  const Scalar eps = static_cast<Scalar>(cfg.epsilon);
  Scalar t = 0;
  for (Eigen::Index l = 0; l < z.size(); ++l) {
    const Scalar zm = std::min(z[l], -eps);
    t += (Scalar(0.5) * zm - z[l]) * zm;
  }
  return t;
}

template <typename Derived>
typename Derived::Scalar stouffer_statistic(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(z, "stouffer_statistic");
  return z.sum() / std::sqrt(static_cast<Scalar>(z.size()));
}

// ---------------------------------------------------------------------------
// p-value statistics

template <typename Derived>
typename Derived::Scalar fisher_statistic(const Eigen::MatrixBase<Derived>& q) {
  detail::require_open_unit(q, "fisher_statistic", true);
  return q.array().log().sum();
}

template <typename Derived>
typename Derived::Scalar bonferroni_statistic(const Eigen::MatrixBase<Derived>& q) {
  detail::require_open_unit(q, "bonferroni_statistic", true);
  return q.minCoeff();
}

/// Simes / Benjamini-Hochberg statistic min_l q_(l) / l over the ascending
/// order statistics.
template <typename Derived>
typename Derived::Scalar simes_statistic(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  detail::require_open_unit(q, "simes_statistic", true);
  const auto sorted = detail::sorted_copy(q);
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (std::size_t l = 0; l < sorted.size(); ++l) {
    best = std::min(best, sorted[l] / static_cast<Scalar>(l + 1));
  }
  return best;
}

/// Negated log of the average likelihood ratio for sparse mixtures.
///
/// With ascending p-values q_(1) <= ... <= q_(m) and k = max(1, floor(m/2)):
///
///   LR_i  = exp(m K(i/m, q_(i)))  if q_(i) < i/m, else 1
///   K(a, p) = a ln(a/p) + (1 - a) ln((1 - a)/(1 - p))
///   ALR   = sum_{i<=k} w_i LR_i,   w_i = (1/i) / sum_{j<=k} (1/j)
///
/// m K(i/m, q_(i)) is the binomial log-likelihood ratio behind the Berk-Jones
/// statistic. The value returned is -ln ALR so that larger means more
/// inlier-like. Equal to 0 whenever no q_(i) falls below i/m.
template <typename Derived>
typename Derived::Scalar alr_statistic(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  detail::require_open_unit(q, "alr_statistic", false);
  const auto sorted = detail::sorted_copy(q);
  const auto m = static_cast<Scalar>(sorted.size());
  const std::size_t k = std::max<std::size_t>(1, sorted.size() / 2);

  Scalar harmonic = 0;
  for (std::size_t i = 1; i <= k; ++i) harmonic += Scalar(1) / static_cast<Scalar>(i);

  std::vector<Scalar> log_terms(k);
  for (std::size_t i = 1; i <= k; ++i) {
    const Scalar a = static_cast<Scalar>(i) / m;
    const Scalar p = sorted[i - 1];
    Scalar log_lr = 0;
    if (p < a) {
      Scalar kl = a * std::log(a / p);
      if (a < 1) kl += (1 - a) * std::log((1 - a) / (1 - p));
      log_lr = m * kl;
    }
    log_terms[i - 1] = log_lr - std::log(static_cast<Scalar>(i) * harmonic);
  }
  const Scalar peak = *std::max_element(log_terms.begin(), log_terms.end());
  Scalar acc = 0;
  for (const Scalar v : log_terms) acc += std::exp(v - peak);
  return -(peak + std::log(acc));
}

// ---------------------------------------------------------------------------
// Correlated negative-means GLRT

struct CovGlrtConfig {
  double epsilon = 0.25;
  Eigen::MatrixXd sigma;
  double tolerance = 1e-8;

  // Throws std::invalid_argument unless sigma is square, symmetric to 1e-10
  // and positive definite.
  void validate() const;
};

template <typename Scalar>
struct Projection {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mu;
  // Multipliers for mu_l <= -epsilon; nonzero only on the active set.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> multipliers;
  Scalar kkt_residual = 0;
  int iterations = 0;
};

/// KKT residual of a candidate mu for min (z-mu)' S^-1 (z-mu), mu <= bound:
/// the worst of primal infeasibility, negative multipliers and
/// complementarity min(|lambda_l|, bound - mu_l), with lambda = S^-1 (z - mu).
template <typename Scalar>
Scalar box_projection_kkt_residual(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& mu,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& lambda, Scalar bound) {
  Scalar r = 0;
  for (Eigen::Index l = 0; l < mu.size(); ++l) {
    r = std::max(r, std::max<Scalar>(mu[l] - bound, 0));
    r = std::max(r, std::max<Scalar>(-lambda[l], 0));
    r = std::max(r, std::min<Scalar>(std::abs(lambda[l]), bound - mu[l]));
  }
  return r;
}

/// argmin over {mu : mu_l <= -epsilon} of (z - mu)' Sigma^-1 (z - mu).
///
/// Primal active-set method started from the Euclidean clamp min(z, -epsilon).
/// On a working set W the free coordinates take the Gaussian conditional mean
///   mu_F = z_F + Sigma_FW Sigma_WW^-1 (-epsilon - z_W),
/// steps are cut at the first blocking bound, and the constraint with the most
/// negative multiplier leaves W. At most 10 m iterations; throws NumericError
/// carrying the KKT residual if the tolerance is not met.
template <typename Derived>
Projection<typename Derived::Scalar> project_mu(const Eigen::MatrixBase<Derived>& z, const CovGlrtConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  cfg.validate();
  detail::require_finite(z, "project_mu");
  const Eigen::Index m = z.size();
  if (cfg.sigma.rows() != m) {
    throw std::invalid_argument("project_mu: sigma is " + std::to_string(cfg.sigma.rows()) + "x" +
                                std::to_string(cfg.sigma.cols()) + " but z has " + std::to_string(m) +
                                " entries");
  }
  const Mat sigma = cfg.sigma.template cast<Scalar>();
  const Eigen::LLT<Mat> sigma_llt(sigma);
  const Scalar bound = -static_cast<Scalar>(cfg.epsilon);
  const Scalar tol = static_cast<Scalar>(cfg.tolerance);
  const Vec zv = z;

  Vec mu = zv.array().min(bound).matrix();
  std::vector<bool> working(m);
  for (Eigen::Index l = 0; l < m; ++l) working[l] = zv[l] >= bound;

  auto equality_solution = [&](const std::vector<bool>& w) {
    std::vector<Eigen::Index> fixed;
    std::vector<Eigen::Index> free;
    for (Eigen::Index l = 0; l < m; ++l) (w[l] ? fixed : free).push_back(l);
    Vec out = zv;
    if (fixed.empty()) return out;
    for (const auto l : fixed) out[l] = bound;
    if (free.empty()) return out;
    const auto nf = static_cast<Eigen::Index>(fixed.size());
    Mat s_ww(nf, nf);
    Vec gap(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gap[a] = bound - zv[fixed[a]];
      for (Eigen::Index b = 0; b < nf; ++b) s_ww(a, b) = sigma(fixed[a], fixed[b]);
    }
    const Vec coeff = s_ww.llt().solve(gap);
    for (const auto f : free) {
      Scalar shift = 0;
      for (Eigen::Index a = 0; a < nf; ++a) shift += sigma(f, fixed[a]) * coeff[a];
      out[f] = zv[f] + shift;
    }
    return out;
  };

  Projection<Scalar> result;
  const int max_iter = static_cast<int>(10 * m);
  Vec lambda = Vec::Zero(m);
  for (int iter = 1; iter <= max_iter; ++iter) {
    result.iterations = iter;
    const Vec target = equality_solution(working);
    const Vec step = target - mu;
    if (step.template lpNorm<Eigen::Infinity>() <= tol * (1 + mu.template lpNorm<Eigen::Infinity>())) {
      lambda = sigma_llt.solve(Vec(zv - target));
      Eigen::Index worst = -1;
      Scalar worst_value = -tol;
      for (Eigen::Index l = 0; l < m; ++l) {
        if (working[l] && lambda[l] < worst_value) {
          worst_value = lambda[l];
          worst = l;
        }
      }
      mu = target;
      if (worst < 0) break;
      working[worst] = false;
      continue;
    }
    Scalar alpha = 1;
    Eigen::Index blocking = -1;
    for (Eigen::Index l = 0; l < m; ++l) {
      if (!working[l] && step[l] > 0) {
        const Scalar ratio = (bound - mu[l]) / step[l];
        if (ratio < alpha) {
          alpha = ratio;
          blocking = l;
        }
      }
    }
    mu += alpha * step;
    if (blocking >= 0) {
      mu[blocking] = bound;
      working[blocking] = true;
    }
  }

  lambda = sigma_llt.solve(Vec(zv - mu));
  for (Eigen::Index l = 0; l < m; ++l) {
    // Free coordinates carry zero multipliers up to roundoff.
    if (!working[l]) lambda[l] = std::abs(lambda[l]) <= tol ? Scalar(0) : lambda[l];
  }
  result.mu = mu;
  result.multipliers = lambda;
  result.kkt_residual = box_projection_kkt_residual<Scalar>(mu, lambda, bound);
  if (!(result.kkt_residual <= tol)) {
    throw NumericError("project_mu: active-set solver did not reach the KKT tolerance",
                       static_cast<double>(result.kkt_residual));
  }
  return result;
}

/// ln GLR(z; Sigma) = (mu*/2 - z)' Sigma^-1 mu*, mu* from project_mu.
template <typename Derived>
typename Derived::Scalar cov_glrt_statistic(const Eigen::MatrixBase<Derived>& z, const CovGlrtConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto proj = project_mu(z, cfg);
  const Vec weighted = cfg.sigma.template cast<Scalar>().llt().solve(proj.mu);
  return (Scalar(0.5) * proj.mu - Vec(z)).dot(weighted);
}

/// Uncentred sample covariance plus ridge:
///   (1/(n-1)) sum_i z_i z_i' + ridge I,   rows of zmatrix are the z_i.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> sample_covariance(
    const Eigen::MatrixBase<Derived>& zmatrix, typename Derived::Scalar ridge) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (zmatrix.rows() < 2) throw std::invalid_argument("sample_covariance: need at least 2 rows");
  if (!(ridge >= 0) || !std::isfinite(ridge)) throw std::invalid_argument("sample_covariance: ridge must be >= 0");
  const Eigen::Index m = zmatrix.cols();
  Mat cov = Mat::Zero(m, m);
  cov.template selfadjointView<Eigen::Lower>().rankUpdate(zmatrix.transpose());
  cov = cov.template selfadjointView<Eigen::Lower>();
  cov /= static_cast<Scalar>(zmatrix.rows() - 1);
  cov.diagonal().array() += ridge;
  return cov;
}

}  // namespace nmfuse
