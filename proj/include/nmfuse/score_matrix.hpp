#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nmfuse {

enum class Label { unknown, inlier, ood };

std::string_view label_name(Label label);
// Accepts "inlier", "ood" and "" / "unknown". Throws SchemaError otherwise.
Label parse_label(std::string_view text);

// n samples x m raw inlier scores (higher = more inlier-like) with named
// columns and optional per-row labels.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  // Throws SchemaError on shape mismatch, empty or duplicate column names.
  ScoreMatrix(std::vector<std::string> sample_ids, std::vector<std::string> column_names, Eigen::MatrixXd values,
              std::vector<Label> labels = {});

  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index cols() const noexcept { return values_.cols(); }

  const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
  const std::vector<std::string>& column_names() const noexcept { return column_names_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  // Empty when the source carried no label column.
  const std::vector<Label>& labels() const noexcept { return labels_; }
  bool has_labels() const noexcept { return !labels_.empty(); }

  std::optional<Eigen::Index> column_index(std::string_view name) const;

  // Throws DataError naming the first non-finite cell (row, column name).
  void require_finite() const;

  // Multiplies the named columns by -1 (for outlier-oriented sources).
  // Throws SchemaError for unknown names.
  void negate_columns(const std::vector<std::string>& names);

  // Rows whose label equals `label`, order preserved.
  ScoreMatrix rows_with_label(Label label) const;

  // FNV-1a over column names and the bit patterns of the values (row major).
  // Independent of sample ids, labels and the file format the data came from.
  std::uint64_t digest() const;

 private:
  std::vector<std::string> sample_ids_;
  std::vector<std::string> column_names_;
  Eigen::MatrixXd values_;
  std::vector<Label> labels_;
};

}  // namespace nmfuse
