#pragma once

// End-to-end fusion: raw score matrix -> empirical z / p-values -> one
// combined statistic per sample. The CLI persists these pieces between
// invocations; this header is the in-process equivalent.

#include "nmfuse/combiner.hpp"
#include "nmfuse/score_matrix.hpp"
#include "nmfuse/ztransform.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nmfuse {

// Everything learned from the inlier training scores.
struct FittedModel {
  ZTransform transform;
  // Columns multiplied by -1 on ingestion (outlier-oriented sources).
  std::vector<std::string> negate;
  double sigma_ridge = 1e-6;
  // Ridge-regularized sample covariance of the training z-values.
  Eigen::MatrixXd sigma;
  std::optional<CsiWeights> csi;
};

struct FitOptions {
  std::vector<std::string> negate;
  double sigma_ridge = 1e-6;
  std::vector<CsiTriple> csi_grouping;
};

FittedModel fit_model(ScoreMatrix train, const FitOptions& options = {});

enum class SigmaSource { sample, identity };
SigmaSource parse_sigma_source(std::string_view text);
std::string_view sigma_source_name(SigmaSource s);

struct CombinerSettings {
  Rule rule = Rule::glrt;
  double epsilon = 0.25;
  SigmaSource sigma = SigmaSource::sample;
};

CombinerSpec make_combiner(const FittedModel& model, const CombinerSettings& settings);

// Applies the model's column negation to a freshly read matrix.
ScoreMatrix prepare(const FittedModel& model, ScoreMatrix raw);

// One statistic per row of `raw` (already prepared).
Eigen::VectorXd score_samples(const FittedModel& model, const CombinerSpec& spec, const ScoreMatrix& raw);

}  // namespace nmfuse
