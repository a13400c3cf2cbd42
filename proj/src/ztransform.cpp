#include "nmfuse/ztransform.hpp"

#include "nmfuse/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nmfuse {

ZTransform ZTransform::fit(const ScoreMatrix& train) {
  train.require_finite();
  if (train.rows() < 2) {
    throw DataError("z-transform needs at least 2 training rows, got " + std::to_string(train.rows()));
  }
  ZTransform t;
  t.names_ = train.column_names();
  t.n_ = train.rows();
  t.train_digest_ = train.digest();
  t.sorted_.resize(t.names_.size());
  for (Eigen::Index c = 0; c < train.cols(); ++c) {
    auto& col = t.sorted_[c];
    col.assign(train.values().col(c).begin(), train.values().col(c).end());
    std::sort(col.begin(), col.end());
  }
  return t;
}

ZTransform ZTransform::from_sorted_columns(std::vector<std::string> names, std::vector<std::vector<double>> sorted,
                                           std::uint64_t train_digest) {
  if (names.empty() || names.size() != sorted.size()) throw DataError("transform: column names and data disagree");
  const std::size_t n = sorted.front().size();
  if (n < 2) throw DataError("transform: fewer than 2 training values per column");
  for (std::size_t c = 0; c < sorted.size(); ++c) {
    const auto& col = sorted[c];
    if (col.size() != n) throw DataError("transform: column '" + names[c] + "' has a different length");
    if (!std::all_of(col.begin(), col.end(), [](double v) { return std::isfinite(v); })) {
      throw DataError("transform: column '" + names[c] + "' holds non-finite values");
    }
    if (!std::is_sorted(col.begin(), col.end())) throw DataError("transform: column '" + names[c] + "' is not sorted");
  }
  // Reuse ScoreMatrix's name checks.
  ScoreMatrix probe({}, names, Eigen::MatrixXd(0, static_cast<Eigen::Index>(names.size())));
  ZTransform t;
  t.names_ = std::move(names);
  t.sorted_ = std::move(sorted);
  t.n_ = static_cast<Eigen::Index>(n);
  t.train_digest_ = train_digest;
  return t;
}

Eigen::Index ZTransform::column(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<Eigen::Index>(i);
  }
  throw SchemaError("unknown score column '" + std::string(name) + "'");
}

Probability ZTransform::empirical_cdf(Eigen::Index col, double s) const {
  const auto& sorted = sorted_.at(col);
  const auto count = std::upper_bound(sorted.begin(), sorted.end(), s) - sorted.begin();
  return Probability(static_cast<double>(count) / static_cast<double>(n_));
}

Probability ZTransform::p_value(Eigen::Index col, double s) const {
  return Probability(std::clamp(empirical_cdf(col, s).value(), q_lo(), q_hi()));
}

double ZTransform::z_value(Eigen::Index col, double s) const {
  if (!std::isfinite(s)) throw DataError("z_value: non-finite score for column '" + names_.at(col) + "'");
  return std_normal_quantile(p_value(col, s));
}

std::vector<Eigen::Index> ZTransform::match_columns(const ScoreMatrix& test) const {
  std::vector<Eigen::Index> idx;
  std::string missing;
  for (const auto& name : names_) {
    if (const auto i = test.column_index(name)) {
      idx.push_back(*i);
    } else {
      missing += (missing.empty() ? "" : ", ") + name;
    }
  }
  std::string extra;
  for (const auto& name : test.column_names()) {
    if (std::find(names_.begin(), names_.end(), name) == names_.end()) extra += (extra.empty() ? "" : ", ") + name;
  }
  if (!missing.empty() || !extra.empty()) {
    throw SchemaError("score columns do not match the fitted transform; missing: [" + missing + "], extra: [" +
                      extra + "]");
  }
  return idx;
}

Eigen::MatrixXd ZTransform::transform_matrix(const ScoreMatrix& test) const {
  const auto idx = match_columns(test);
  test.require_finite();
  Eigen::MatrixXd z(test.rows(), m());
  for (Eigen::Index c = 0; c < m(); ++c) {
    for (Eigen::Index r = 0; r < test.rows(); ++r) z(r, c) = z_value(c, test.values()(r, idx[c]));
  }
  return z;
}

Eigen::MatrixXd ZTransform::p_value_matrix(const ScoreMatrix& test) const {
  const auto idx = match_columns(test);
  test.require_finite();
  Eigen::MatrixXd q(test.rows(), m());
  for (Eigen::Index c = 0; c < m(); ++c) {
    for (Eigen::Index r = 0; r < test.rows(); ++r) q(r, c) = p_value(c, test.values()(r, idx[c]));
  }
  return q;
}

}  // namespace nmfuse
