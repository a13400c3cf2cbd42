#include "nmfuse/pipeline.hpp"

#include "nmfuse/errors.hpp"

namespace nmfuse {

FittedModel fit_model(ScoreMatrix train, const FitOptions& options) {
  train.negate_columns(options.negate);
  FittedModel model{ZTransform::fit(train), options.negate, options.sigma_ridge, {}, std::nullopt};
  model.sigma = sample_covariance(model.transform.transform_matrix(train), options.sigma_ridge);
  if (!options.csi_grouping.empty()) model.csi = fit_csi_weights(train, options.csi_grouping);
  return model;
}

SigmaSource parse_sigma_source(std::string_view text) {
  if (text == "sample") return SigmaSource::sample;
  if (text == "identity") return SigmaSource::identity;
  throw ConfigError("sigma source must be 'sample' or 'identity', got '" + std::string(text) + "'");
}

std::string_view sigma_source_name(SigmaSource s) { return s == SigmaSource::sample ? "sample" : "identity"; }

CombinerSpec make_combiner(const FittedModel& model, const CombinerSettings& settings) {
  CombinerSpec spec;
  spec.rule = settings.rule;
  spec.epsilon = settings.epsilon;
  if (settings.rule == Rule::glrt_cov) {
    const auto m = model.transform.m();
    spec.sigma = settings.sigma == SigmaSource::sample ? model.sigma : Eigen::MatrixXd::Identity(m, m);
  }
  if (settings.rule == Rule::csi) {
    if (!model.csi) throw ConfigError("csi rule needs a model fitted with --csi-group");
    spec.csi = model.csi;
  }
  spec.validate(model.transform.m());
  return spec;
}

ScoreMatrix prepare(const FittedModel& model, ScoreMatrix raw) {
  raw.negate_columns(model.negate);
  return raw;
}

Eigen::VectorXd score_samples(const FittedModel& model, const CombinerSpec& spec, const ScoreMatrix& raw) {
  CombinerInput in;
  in.z = model.transform.transform_matrix(raw);
  if (uses_p_values(spec.rule)) in.q = model.transform.p_value_matrix(raw);
  in.raw = &raw;
  return combine(spec, in);
}

}  // namespace nmfuse
