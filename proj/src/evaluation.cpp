#include "nmfuse/evaluation.hpp"

#include "nmfuse/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nmfuse {
namespace {

void require_classes(const LabeledStatistics& d) {
  if (d.inlier.size() == 0 || d.ood.size() == 0) throw std::invalid_argument("metrics need both classes nonempty");
  if (!d.inlier.allFinite() || !d.ood.allFinite()) throw std::invalid_argument("metrics need finite statistics");
}

struct Tagged {
  double value;
  bool inlier;
};

std::vector<Tagged> sorted_union(const LabeledStatistics& d) {
  std::vector<Tagged> all;
  all.reserve(static_cast<std::size_t>(d.inlier.size() + d.ood.size()));
  for (const double v : d.inlier) all.push_back({v, true});
  for (const double v : d.ood) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) { return a.value < b.value; });
  return all;
}

Eigen::VectorXd midranks(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
  Eigen::VectorXd ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Probability auroc(const LabeledStatistics& d) {
  require_classes(d);
  const auto all = sorted_union(d);
  // U = sum over inliers of (#ood strictly below + 0.5 #ood tied), in units
  // of 1/2 so the accumulation stays exact.
  double twice_u = 0.0;
  std::size_t ood_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t in_group = 0;
    std::size_t ood_group = 0;
    while (j < all.size() && all[j].value == all[i].value) {
      (all[j].inlier ? in_group : ood_group) += 1;
      ++j;
    }
    twice_u += static_cast<double>(in_group) * static_cast<double>(2 * ood_below + ood_group);
    ood_below += ood_group;
    i = j;
  }
  const double pairs = static_cast<double>(d.inlier.size()) * static_cast<double>(d.ood.size());
  return Probability(0.5 * twice_u / pairs);
}

std::vector<RocPoint> roc_curve(const LabeledStatistics& d) {
  require_classes(d);
  const auto all = sorted_union(d);
  const auto n_in = static_cast<double>(d.inlier.size());
  const auto n_ood = static_cast<double>(d.ood.size());
  std::vector<RocPoint> curve{{-std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t in_le = 0;
  std::size_t ood_le = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].value == all[i].value) {
      (all[j].inlier ? in_le : ood_le) += 1;
      ++j;
    }
    curve.push_back({all[i].value, static_cast<double>(in_le) / n_in, static_cast<double>(ood_le) / n_ood});
    i = j;
  }
  return curve;
}

double roc_area(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].far - curve[i - 1].far) * 0.5 * (curve[i].dr + curve[i - 1].dr);
  }
  return area;
}

DetectionAtFar dr_at_far(const LabeledStatistics& d, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("dr_at_far: alpha must lie in (0, 1)");
  const auto curve = roc_curve(d);
  DetectionAtFar best;
  best.threshold = curve.front().threshold;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    // FAR is nondecreasing along the curve.
    if (curve[i].far > alpha) break;
    best = {curve[i].threshold, curve[i].far, curve[i].dr, false};
  }
  return best;
}

double spearman(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length vectors");
  const Eigen::VectorXd rx = midranks(x);
  const Eigen::VectorXd ry = midranks(y);
  const Eigen::VectorXd cx = rx.array() - rx.mean();
  const Eigen::VectorXd cy = ry.array() - ry.mean();
  const double denom = std::sqrt(cx.squaredNorm() * cy.squaredNorm());
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cx.dot(cy) / denom;
}

EigenScoreTable eigen_analysis(const Eigen::MatrixXd& z_train, const Eigen::MatrixXd& z_inlier,
                               const Eigen::MatrixXd& z_ood, double epsilon, double sigma_ridge,
                               EigenMetric metric) {
  const Eigen::Index m = z_train.cols();
  if (m < 1 || z_train.rows() < m) throw std::invalid_argument("eigen_analysis: need n >= m >= 1 training rows");
  if (z_inlier.cols() != m || z_ood.cols() != m) throw std::invalid_argument("eigen_analysis: column count mismatch");

  EigenScoreTable table;
  table.metric = metric;
  table.covariance = sample_covariance(z_train, sigma_ridge);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(table.covariance);
  if (solver.info() != Eigen::Success) throw NumericError("eigen_analysis: eigen-decomposition failed", 0.0);
  // Eigen returns ascending eigenvalues.
  table.eigenvalues = solver.eigenvalues().reverse();
  table.eigenvectors = solver.eigenvectors().rowwise().reverse();

  const GlrtConfig glrt{epsilon};
  glrt.validate();
  const CovGlrtConfig cov{epsilon, table.covariance};
  auto scores_for = [&](const Eigen::MatrixXd& z) {
    Eigen::MatrixXd out(z.rows(), m);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const Eigen::VectorXd zr = z.row(r).transpose();
      const Eigen::VectorXd mu =
          metric == EigenMetric::identity ? Eigen::VectorXd(clamp_to_negative_means(zr, epsilon)) : project_mu(zr, cov).mu;
      out.row(r) = eigen_scores(zr, mu, table.eigenvectors).transpose();
    }
    return out;
  };
  table.inlier_scores = scores_for(z_inlier);
  table.ood_scores = scores_for(z_ood);

  table.auroc.resize(m);
  if (z_inlier.rows() > 0 && z_ood.rows() > 0) {
    for (Eigen::Index k = 0; k < m; ++k) {
      table.auroc[k] = auroc({table.inlier_scores.col(k), table.ood_scores.col(k)});
    }
  } else {
    table.auroc.setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  return table;
}

std::vector<CurvePoint> calibrated_curve(const std::function<double(double)>& statistic, double far_target,
                                         const std::vector<double>& grid) {
  if (!(far_target > 0.0 && far_target < 1.0)) throw std::invalid_argument("calibrated_curve: far_target in (0, 1)");
  std::vector<double> values;
  values.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0 && !(grid[i] > grid[i - 1])) throw std::invalid_argument("calibrated_curve: grid must be increasing");
    values.push_back(statistic(grid[i]));
    if (!std::isfinite(values.back())) throw std::invalid_argument("calibrated_curve: statistic is not finite on grid");
    if (i > 0 && values[i] < values[i - 1]) {
      throw std::invalid_argument("calibrated_curve: statistic is not monotone on the grid");
    }
  }
  const double z0 = std_normal_quantile(far_target);
  const double tau = statistic(z0);
  const double h = 1e-5 * std::max(1.0, std::abs(z0));
  const double slope = (statistic(z0 + h) - statistic(z0 - h)) / (2.0 * h);
  if (!(slope > 0.0)) throw std::invalid_argument("calibrated_curve: statistic has no positive slope at z0");
  std::vector<CurvePoint> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out.push_back({grid[i], (values[i] - tau) / slope});
  return out;
}

}  // namespace nmfuse
