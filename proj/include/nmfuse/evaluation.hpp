#pragma once

// Detection metrics for statistics oriented "higher = more inlier", where a
// detector flags a sample as OOD when its statistic is <= a threshold.

#include "nmfuse/combiners.hpp"
#include "nmfuse/numerics.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <vector>

namespace nmfuse {

struct LabeledStatistics {
  Eigen::VectorXd inlier;
  Eigen::VectorXd ood;
};

// Mann-Whitney probability that a random inlier statistic exceeds a random OOD
// statistic, ties counting 1/2. Throws std::invalid_argument on an empty
// class or non-finite values.
Probability auroc(const LabeledStatistics& d);

struct RocPoint {
  double threshold;
  double far;
  double dr;
};

// Operating points of "OOD iff t <= threshold" for every distinct statistic,
// preceded by (-inf, 0, 0). Ascending in threshold.
std::vector<RocPoint> roc_curve(const LabeledStatistics& d);

// Trapezoidal area under DR-versus-FAR; equals auroc.
double roc_area(const std::vector<RocPoint>& curve);

struct DetectionAtFar {
  double threshold = -std::numeric_limits<double>::infinity();
  double far = 0.0;
  double dr = 0.0;
  // No finite threshold keeps the inlier FAR <= alpha.
  bool degenerate = true;
};

/// Largest threshold among the observed statistics whose empirical inlier FAR
/// is <= alpha, and the OOD detection rate it achieves. Throws
/// std::invalid_argument unless alpha lies in (0, 1).
DetectionAtFar dr_at_far(const LabeledStatistics& d, double alpha);

// Spearman rank correlation (midranks for ties). NaN when either input is
// constant.
double spearman(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

// ---------------------------------------------------------------------------
// Eigen-score analysis of the GLRT.

/// Per-direction contributions of the GLRT statistic along an orthonormal
/// basis (columns of `basis`):
///   t_k(z) = ((mu/2 - z)' v_k) (v_k' mu),
/// so the contributions sum to (mu/2 - z)' mu for a full basis.
template <typename DerivedZ, typename DerivedMu, typename DerivedV>
Eigen::Matrix<typename DerivedZ::Scalar, Eigen::Dynamic, 1> eigen_scores(const Eigen::MatrixBase<DerivedZ>& z,
                                                                         const Eigen::MatrixBase<DerivedMu>& mu,
                                                                         const Eigen::MatrixBase<DerivedV>& basis) {
  using Scalar = typename DerivedZ::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Vec residual = Scalar(0.5) * mu - z;
  return (basis.transpose() * residual).cwiseProduct(basis.transpose() * mu);
}

enum class EigenMetric {
  // mu* is the Euclidean clamp min(z, -epsilon); contributions sum to the
  // GLRT statistic.
  identity,
  // mu* is the projection in the Sigma_hat^-1 metric; contributions divided
  // by lambda_k sum to the covariance GLRT statistic.
  sample_covariance,
};

struct EigenScoreTable {
  // Descending.
  Eigen::VectorXd eigenvalues;
  // Column k pairs with eigenvalues[k].
  Eigen::MatrixXd eigenvectors;
  // Rows are samples, columns are directions k.
  Eigen::MatrixXd inlier_scores;
  Eigen::MatrixXd ood_scores;
  Eigen::VectorXd auroc;
  Eigen::MatrixXd covariance;
  EigenMetric metric = EigenMetric::identity;
};

/// Sample covariance of the training z-values, its eigen-decomposition and
/// the AUROC of each eigen-score on the labelled test z-values.
/// Requires n >= m >= 1 training rows; throws NumericError if the eigen
/// solver fails.
EigenScoreTable eigen_analysis(const Eigen::MatrixXd& z_train, const Eigen::MatrixXd& z_inlier,
                               const Eigen::MatrixXd& z_ood, double epsilon, double sigma_ridge = 1e-6,
                               EigenMetric metric = EigenMetric::identity);

// ---------------------------------------------------------------------------

struct CurvePoint {
  double z;
  double value;
};

/// Shift and scale a scalar statistic t(z) so that t'(z) = C (t(z) - tau) has
/// Pr{t'(Z) <= 0} = far_target for Z ~ N(0, 1) and unit slope at the zero
/// crossing z0 = Phi^-1(far_target). The slope is a central difference.
/// Throws std::invalid_argument if t decreases anywhere on the grid or has no
/// positive slope at z0.
std::vector<CurvePoint> calibrated_curve(const std::function<double(double)>& statistic, double far_target,
                                         const std::vector<double>& grid);

}  // namespace nmfuse
