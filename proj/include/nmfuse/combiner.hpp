#pragma once

// Runtime-selected combining rule applied over batches of samples.

#include "nmfuse/combiners.hpp"
#include "nmfuse/score_matrix.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nmfuse {

enum class Rule { glrt, fisher, bonferroni, simes, stouffer, alr, csi, glrt_cov };

std::string_view rule_name(Rule rule);
const std::vector<std::string_view>& rule_names();
// Throws ConfigError listing the valid names.
Rule parse_rule(std::string_view name);
// Fisher, Bonferroni, Simes and ALR consume p-values.
bool uses_p_values(Rule rule);

struct CombinedStatistic {
  double value = 0.0;
  Rule rule = Rule::glrt;
};

// ---------------------------------------------------------------------------
// CSI heuristic: sum_j [lambda_con_j * cos_j * norm_j + lambda_shift_j * shift_j]
// over raw (untransformed) scores.

struct CsiTriple {
  std::string cos;
  std::string norm;
  std::string shift;
};

struct CsiGroup {
  CsiTriple columns;
  double lambda_con = 1.0;
  double lambda_shift = 1.0;
};

struct CsiWeights {
  std::vector<CsiGroup> groups;

  // Throws std::invalid_argument for non-positive / non-finite weights or a
  // column listed twice.
  void validate() const;
};

// Parses "cos:norm:shift" triples. Throws ConfigError.
CsiTriple parse_csi_triple(std::string_view text);

/// lambda_con_j = 1 / mean(norm_j), lambda_shift_j = 1 / mean(shift_j) over
/// the training rows. Throws SchemaError for missing columns and DataError
/// for a non-positive mean.
CsiWeights fit_csi_weights(const ScoreMatrix& train, const std::vector<CsiTriple>& grouping);

/// Evaluates the heuristic on one raw-score row whose columns are named by
/// `columns`. Throws SchemaError if a grouped column is absent.
CombinedStatistic csi_heuristic_statistic(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                                          const std::vector<std::string>& columns, const CsiWeights& weights);

// ---------------------------------------------------------------------------

struct CombinerSpec {
  Rule rule = Rule::glrt;
  double epsilon = 0.25;
  // Used by Rule::glrt_cov.
  Eigen::MatrixXd sigma;
  // Used by Rule::csi.
  std::optional<CsiWeights> csi;

  // Throws ConfigError when the rule's parameters are missing or invalid.
  void validate(Eigen::Index m) const;
};

// A batch of samples in the representations the rules need. Rows are samples.
struct CombinerInput {
  Eigen::MatrixXd z;
  // Inlier p-values. When empty, p-value rules use Phi(z).
  Eigen::MatrixXd q;
  // Raw scores; required by Rule::csi only.
  const ScoreMatrix* raw = nullptr;
};

CombinedStatistic combine_row(const CombinerSpec& spec, const CombinerInput& in, Eigen::Index row);

// One statistic per row of the input.
Eigen::VectorXd combine(const CombinerSpec& spec, const CombinerInput& in);

}  // namespace nmfuse
