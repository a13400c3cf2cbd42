#include "nmfuse/score_matrix.hpp"

#include "nmfuse/errors.hpp"

#include <bit>
#include <cmath>
#include <set>

namespace nmfuse {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::string_view label_name(Label label) {
  switch (label) {
    case Label::inlier:
      return "inlier";
    case Label::ood:
      return "ood";
    case Label::unknown:
      break;
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "inlier") return Label::inlier;
  if (text == "ood") return Label::ood;
  if (text.empty() || text == "unknown") return Label::unknown;
  throw SchemaError("label must be 'inlier', 'ood' or 'unknown', got '" + std::string(text) + "'");
}

ScoreMatrix::ScoreMatrix(std::vector<std::string> sample_ids, std::vector<std::string> column_names,
                         Eigen::MatrixXd values, std::vector<Label> labels)
    : sample_ids_(std::move(sample_ids)),
      column_names_(std::move(column_names)),
      values_(std::move(values)),
      labels_(std::move(labels)) {
  if (column_names_.empty()) throw SchemaError("score matrix has no score columns");
  if (values_.cols() != static_cast<Eigen::Index>(column_names_.size())) {
    throw SchemaError("score matrix has " + std::to_string(values_.cols()) + " value columns but " +
                      std::to_string(column_names_.size()) + " names");
  }
  if (static_cast<Eigen::Index>(sample_ids_.size()) != values_.rows()) {
    throw SchemaError("score matrix has " + std::to_string(values_.rows()) + " rows but " +
                      std::to_string(sample_ids_.size()) + " sample ids");
  }
  if (!labels_.empty() && static_cast<Eigen::Index>(labels_.size()) != values_.rows()) {
    throw SchemaError("label count does not match row count");
  }
  std::set<std::string_view> seen;
  for (const auto& name : column_names_) {
    if (name.empty()) throw SchemaError("empty score column name");
    if (!seen.insert(name).second) throw SchemaError("duplicate score column '" + name + "'");
  }
}

std::optional<Eigen::Index> ScoreMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < column_names_.size(); ++i) {
    if (column_names_[i] == name) return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

void ScoreMatrix::require_finite() const {
  for (Eigen::Index c = 0; c < cols(); ++c) {
    for (Eigen::Index r = 0; r < rows(); ++r) {
      if (!std::isfinite(values_(r, c))) {
        throw DataError("non-finite score in column '" + column_names_[c] + "' at row " + std::to_string(r + 1) +
                        " (sample '" + sample_ids_[r] + "')");
      }
    }
  }
}

void ScoreMatrix::negate_columns(const std::vector<std::string>& names) {
  for (const auto& name : names) {
    const auto idx = column_index(name);
    if (!idx) throw SchemaError("cannot negate unknown column '" + name + "'");
    values_.col(*idx) = -values_.col(*idx);
  }
}

ScoreMatrix ScoreMatrix::rows_with_label(Label label) const {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < rows(); ++r) {
    if (!labels_.empty() && labels_[r] == label) keep.push_back(r);
  }
  std::vector<std::string> ids;
  std::vector<Label> labels;
  Eigen::MatrixXd vals(static_cast<Eigen::Index>(keep.size()), cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    ids.push_back(sample_ids_[keep[i]]);
    labels.push_back(label);
    vals.row(static_cast<Eigen::Index>(i)) = values_.row(keep[i]);
  }
  return ScoreMatrix(std::move(ids), column_names_, std::move(vals), std::move(labels));
}

std::uint64_t ScoreMatrix::digest() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& name : column_names_) {
    fnv_bytes(h, name.data(), name.size());
    const char sep = '\x1f';
    fnv_bytes(h, &sep, 1);
  }
  for (Eigen::Index r = 0; r < rows(); ++r) {
    for (Eigen::Index c = 0; c < cols(); ++c) {
      const auto bits = std::bit_cast<std::uint64_t>(values_(r, c));
      fnv_bytes(h, &bits, sizeof(bits));
    }
  }
  return h;
}

}  // namespace nmfuse
