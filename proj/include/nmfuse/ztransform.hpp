#pragma once

#include "nmfuse/numerics.hpp"
#include "nmfuse/score_matrix.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nmfuse {

/// Per-column empirical cdf of inlier training scores, and the empirical
/// z-value map z_l(s) = Phi^-1(clamp(F_l(s), 1/(n+1), n/(n+1))).
///
/// F_l(s) counts training scores <= s (ties included, duplicates kept). The
/// clamp keeps z finite for test scores outside the training range; for
/// F in [1/n, (n-1)/n] it never binds. Immutable after construction.
class ZTransform {
 public:
  // Throws DataError for non-finite scores (naming row and column) or n < 2.
  static ZTransform fit(const ScoreMatrix& train);

  // Rebuilds a fitted transform from persisted parts. Throws DataError if the
  // columns are not sorted, have unequal lengths, or hold fewer than 2 values.
  static ZTransform from_sorted_columns(std::vector<std::string> names, std::vector<std::vector<double>> sorted,
                                        std::uint64_t train_digest);

  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index m() const noexcept { return static_cast<Eigen::Index>(names_.size()); }
  double q_lo() const noexcept { return 1.0 / static_cast<double>(n_ + 1); }
  double q_hi() const noexcept { return static_cast<double>(n_) / static_cast<double>(n_ + 1); }

  const std::vector<std::string>& column_names() const noexcept { return names_; }
  std::span<const double> sorted_column(Eigen::Index col) const { return sorted_.at(col); }
  // Digest of the training matrix the transform was fitted on.
  std::uint64_t train_digest() const noexcept { return train_digest_; }

  // Throws SchemaError for unknown columns.
  Eigen::Index column(std::string_view name) const;

  Probability empirical_cdf(Eigen::Index col, double s) const;
  Probability empirical_cdf(std::string_view col, double s) const { return empirical_cdf(column(col), s); }

  // F clamped to [q_lo, q_hi]; the inlier p-value fed to p-value combiners.
  Probability p_value(Eigen::Index col, double s) const;
  Probability p_value(std::string_view col, double s) const { return p_value(column(col), s); }

  double z_value(Eigen::Index col, double s) const;
  double z_value(std::string_view col, double s) const { return z_value(column(col), s); }

  // Element-wise z_value over test rows, columns matched by name and emitted
  // in this transform's column order. Throws SchemaError listing missing and
  // extra columns on mismatch, DataError on non-finite scores.
  Eigen::MatrixXd transform_matrix(const ScoreMatrix& test) const;
  // Same layout as transform_matrix, holding p_value instead.
  Eigen::MatrixXd p_value_matrix(const ScoreMatrix& test) const;

  bool operator==(const ZTransform&) const = default;

 private:
  ZTransform() = default;
  std::vector<Eigen::Index> match_columns(const ScoreMatrix& test) const;

  std::vector<std::string> names_;
  std::vector<std::vector<double>> sorted_;
  Eigen::Index n_ = 0;
  std::uint64_t train_digest_ = 0;
};

}  // namespace nmfuse
