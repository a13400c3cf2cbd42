#include "nmfuse/combiner.hpp"

#include "nmfuse/errors.hpp"
#include "nmfuse/numerics.hpp"


#include <cmath>
#include <set>

namespace nmfuse {

void CovGlrtConfig::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw std::invalid_argument("epsilon must be finite and >= 0");
  if (!(tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  if (sigma.rows() == 0 || sigma.rows() != sigma.cols()) throw std::invalid_argument("sigma must be square and nonempty");
  if (!sigma.allFinite()) throw std::invalid_argument("sigma has non-finite entries");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw std::invalid_argument("sigma is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("sigma is not positive definite");
}

namespace {

const std::vector<std::pair<Rule, std::string_view>>& rule_table() {
  static const std::vector<std::pair<Rule, std::string_view>> table = {
      {Rule::glrt, "glrt"},         {Rule::fisher, "fisher"}, {Rule::bonferroni, "bonferroni"},
      {Rule::simes, "simes"},       {Rule::stouffer, "stouffer"}, {Rule::alr, "alr"},
      {Rule::csi, "csi"},           {Rule::glrt_cov, "glrt-cov"}};
  return table;
}

struct BoundCsi {
  Eigen::Index cos, norm, shift;
  double lambda_con, lambda_shift;
};

std::vector<BoundCsi> bind_csi(const CsiWeights& weights, const std::vector<std::string>& columns) {
  auto find = [&](const std::string& name) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<Eigen::Index>(i);
    }
    throw SchemaError("CSI grouping refers to missing column '" + name + "'");
  };
  std::vector<BoundCsi> out;
  for (const auto& g : weights.groups) {
    out.push_back({find(g.columns.cos), find(g.columns.norm), find(g.columns.shift), g.lambda_con, g.lambda_shift});
  }
  return out;
}

double csi_value(const std::vector<BoundCsi>& bound, const Eigen::Ref<const Eigen::RowVectorXd>& raw) {
  double t = 0.0;
  for (const auto& g : bound) t += g.lambda_con * raw[g.cos] * raw[g.norm] + g.lambda_shift * raw[g.shift];
  return t;
}

}  // namespace

std::string_view rule_name(Rule rule) {
  for (const auto& [r, name] : rule_table()) {
    if (r == rule) return name;
  }
  return "unknown";
}

const std::vector<std::string_view>& rule_names() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> out;
    for (const auto& entry : rule_table()) out.push_back(entry.second);
    return out;
  }();
  return names;
}

Rule parse_rule(std::string_view name) {
  for (const auto& [r, n] : rule_table()) {
    if (n == name) return r;
  }
  std::string valid;
  for (const auto n : rule_names()) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("unknown rule '" + std::string(name) + "'; valid rules: " + valid);
}

bool uses_p_values(Rule rule) {
  return rule == Rule::fisher || rule == Rule::bonferroni || rule == Rule::simes || rule == Rule::alr;
}

void CsiWeights::validate() const {
  if (groups.empty()) throw std::invalid_argument("CSI weights: no groups");
  std::set<std::string> seen;
  for (const auto& g : groups) {
    for (const auto* w : {&g.lambda_con, &g.lambda_shift}) {
      if (!std::isfinite(*w) || !(*w > 0.0)) throw std::invalid_argument("CSI weights must be positive and finite");
    }
    for (const auto* c : {&g.columns.cos, &g.columns.norm, &g.columns.shift}) {
      if (!seen.insert(*c).second) throw std::invalid_argument("CSI grouping lists column '" + *c + "' twice");
    }
  }
}

CsiTriple parse_csi_triple(std::string_view text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(':', start);
    parts.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (parts.size() != 3 || parts[0].empty() || parts[1].empty() || parts[2].empty()) {
    throw ConfigError("CSI group must look like cos_col:norm_col:shift_col, got '" + std::string(text) + "'");
  }
  return {parts[0], parts[1], parts[2]};
}

CsiWeights fit_csi_weights(const ScoreMatrix& train, const std::vector<CsiTriple>& grouping) {
  if (grouping.empty()) throw ConfigError("CSI grouping is empty");
  train.require_finite();
  if (train.rows() < 1) throw DataError("CSI weights need at least one training row");
  auto mean_of = [&](const std::string& name) {
    const auto idx = train.column_index(name);
    if (!idx) throw SchemaError("CSI grouping refers to missing column '" + name + "'");
    const double mean = train.values().col(*idx).mean();
    if (!(mean > 0.0)) {
      throw DataError("CSI weight for column '" + name + "' undefined: training mean " + std::to_string(mean) +
                      " is not positive");
    }
    return mean;
  };
  CsiWeights w;
  for (const auto& triple : grouping) {
    if (!train.column_index(triple.cos)) throw SchemaError("CSI grouping refers to missing column '" + triple.cos + "'");
    w.groups.push_back({triple, 1.0 / mean_of(triple.norm), 1.0 / mean_of(triple.shift)});
  }
  w.validate();
  return w;
}

CombinedStatistic csi_heuristic_statistic(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                                          const std::vector<std::string>& columns, const CsiWeights& weights) {
  weights.validate();
  if (raw.size() != static_cast<Eigen::Index>(columns.size())) {
    throw std::invalid_argument("csi_heuristic_statistic: row and column list differ in length");
  }
  return {csi_value(bind_csi(weights, columns), raw), Rule::csi};
}

void CombinerSpec::validate(Eigen::Index m) const {
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw ConfigError("epsilon must be finite and >= 0");
  if (rule == Rule::glrt_cov) {
    if (sigma.rows() != m || sigma.cols() != m) {
      throw ConfigError("glrt-cov needs a " + std::to_string(m) + "x" + std::to_string(m) + " covariance");
    }
    try {
      CovGlrtConfig{epsilon, sigma}.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("glrt-cov: ") + e.what());
    }
  }
  if (rule == Rule::csi) {
    if (!csi) throw ConfigError("csi rule needs CSI weights (fit them with a grouping)");
    try {
      csi->validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
}

CombinedStatistic combine_row(const CombinerSpec& spec, const CombinerInput& in, Eigen::Index row) {
  CombinerInput one;
  one.z = in.z.row(row);
  if (in.q.size() > 0) one.q = in.q.row(row);
  std::optional<ScoreMatrix> raw_row;
  if (in.raw != nullptr) {
    raw_row.emplace(std::vector<std::string>{in.raw->sample_ids().at(row)}, in.raw->column_names(),
                    in.raw->values().row(row));
    one.raw = &*raw_row;
  }
  return {combine(spec, one)[0], spec.rule};
}

Eigen::VectorXd combine(const CombinerSpec& spec, const CombinerInput& in) {
  const Eigen::Index n = spec.rule == Rule::csi && in.raw != nullptr ? in.raw->rows() : in.z.rows();
  const Eigen::Index m = in.z.cols();
  spec.validate(m);
  Eigen::VectorXd out(n);
  if (n == 0) return out;

  if (spec.rule == Rule::csi) {
    if (in.raw == nullptr) throw SchemaError("csi rule needs the raw score matrix");
    const auto bound = bind_csi(*spec.csi, in.raw->column_names());
    for (Eigen::Index r = 0; r < n; ++r) out[r] = csi_value(bound, in.raw->values().row(r));
    return out;
  }

  if (uses_p_values(spec.rule)) {
    Eigen::MatrixXd q = in.q;
    if (q.size() == 0) {
      q.resize(in.z.rows(), in.z.cols());
      for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = std_normal_cdf(in.z.data()[i]);
    }
    if (q.rows() != n) throw std::invalid_argument("combine: p-value matrix has the wrong number of rows");
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::VectorXd row = q.row(r).transpose();
      switch (spec.rule) {
        case Rule::fisher:
          out[r] = fisher_statistic(row);
          break;
        case Rule::bonferroni:
          out[r] = bonferroni_statistic(row);
          break;
        case Rule::simes:
          out[r] = simes_statistic(row);
          break;
        default:
          out[r] = alr_statistic(row);
          break;
      }
    }
    return out;
  }

  const GlrtConfig glrt{spec.epsilon};
  const CovGlrtConfig cov{spec.epsilon, spec.sigma};
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::VectorXd row = in.z.row(r).transpose();
    switch (spec.rule) {
      case Rule::glrt:
        out[r] = glrt_statistic(row, glrt);
        break;
      case Rule::stouffer:
        out[r] = stouffer_statistic(row);
        break;
      default:
        out[r] = cov_glrt_statistic(row, cov);
        break;
    }
  }
  return out;
}

}  // namespace nmfuse
