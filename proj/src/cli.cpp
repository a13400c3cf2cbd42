#include "nmfuse/cli.hpp"

#include "nmfuse/conformal.hpp"
#include "nmfuse/errors.hpp"
#include "nmfuse/evaluation.hpp"
#include "nmfuse/io.hpp"
#include "nmfuse/pipeline.hpp"
#include "nmfuse/serialization.hpp"
#include "nmfuse/synthbench.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <ostream>
#include <sstream>

namespace nmfuse::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// FNV-1a over "key=value;" pairs of the settings that shape an output.
// Paths are excluded so the same data read from another location (or
// format) yields the same provenance.
std::uint64_t config_hash(const std::vector<std::pair<std::string, std::string>>& settings) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : settings) {
    for (const char c : k + "=" + v + ";") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string join(const std::vector<double>& items) {
  std::vector<std::string> text;
  for (const double v : items) text.push_back(format_double(v));
  return join(text);
}

std::string header_line(const Provenance& prov) {
  return "# nmfuse " + std::string(kToolVersion) + " command=" + prov.command +
         " config_hash=" + hex64(prov.config_hash) + " seed=" + std::to_string(prov.seed) + "\n";
}

// Writes a table either as CSV (with a '#' provenance line) or as NDJSON
// (with a leading {"_header": ...} record).
class TableWriter {
 public:
  TableWriter(TableFormat format, const Provenance& prov, std::vector<std::string> columns)
      : format_(format), columns_(std::move(columns)) {
    if (format_ == TableFormat::csv) {
      buf_ << header_line(prov) << join(columns_) << "\n";
    } else {
      ordered_json h = {{"tool", "nmfuse " + std::string(kToolVersion)},
                        {"command", prov.command},
                        {"config_hash", hex64(prov.config_hash)},
                        {"seed", prov.seed}};
      buf_ << ordered_json{{"_header", h}}.dump() << "\n";
    }
  }

  // Cells are pre-formatted; `numeric[i]` marks cells emitted as JSON numbers.
  void row(const std::vector<std::string>& cells, const std::vector<bool>& numeric) {
    if (format_ == TableFormat::csv) {
      buf_ << join(cells) << "\n";
      return;
    }
    // Build the record by hand so numbers keep their exact shortest text.
    std::string line = "{";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) line += ",";
      line += ordered_json(columns_[i]).dump() + ":";
      line += numeric[i] ? cells[i] : ordered_json(cells[i]).dump();
    }
    buf_ << line << "}\n";
  }

  std::string str() const { return buf_.str(); }

 private:
  TableFormat format_;
  std::vector<std::string> columns_;
  std::ostringstream buf_;
};

ScoreMatrix load_scores(const std::string& path, const ReadOptions& opts = {}) {
  if (!fs::exists(path)) throw IoError("input file '" + path + "' does not exist");
  return read_scores(path, opts);
}

FittedModel load_model(const std::string& path) { return parse_model(read_file(path)); }

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string train;
  std::string out;
  std::vector<std::string> negate;
  std::vector<std::string> csi_groups;
  double sigma_ridge = 1e-6;
  std::uint64_t seed = 0;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  FitOptions opts;
  opts.negate = a.negate;
  opts.sigma_ridge = a.sigma_ridge;
  for (const auto& g : a.csi_groups) opts.csi_grouping.push_back(parse_csi_triple(g));
  const auto model = fit_model(load_scores(a.train), opts);
  const Provenance prov{"fit",
                        config_hash({{"negate", join(a.negate)},
                                     {"csi", join(a.csi_groups)},
                                     {"sigma_ridge", format_double(a.sigma_ridge)}}),
                        a.seed};
  write_file_atomic(a.out, serialize_model(model, prov));
  out << "fitted " << model.transform.m() << " columns on " << model.transform.n() << " samples -> " << a.out << "\n";
  return kOk;
}

struct CombineArgs {
  std::string model;
  std::string test;
  std::string out;
  std::string rule = "glrt";
  double epsilon = 0.25;
  std::string sigma = "sample";
  std::string format = "csv";
  bool z_input = false;
  std::uint64_t seed = 0;
};

std::vector<std::pair<std::string, std::string>> combiner_settings(const CombinerSettings& s) {
  return {{"rule", std::string(rule_name(s.rule))},
          {"epsilon", format_double(s.epsilon)},
          {"sigma", std::string(sigma_source_name(s.sigma))}};
}

int cmd_combine(const CombineArgs& a, std::ostream& out) {
  const CombinerSettings settings{parse_rule(a.rule), a.epsilon, parse_sigma_source(a.sigma)};
  const auto format = parse_table_format(a.format);
  ScoreMatrix test = load_scores(a.test);
  Eigen::VectorXd stats;
  if (a.z_input) {
    // Columns already hold z-values.
    if (settings.rule == Rule::csi) throw ConfigError("csi rule needs raw scores, not --z-input");
    test.require_finite();
    CombinerSpec spec{settings.rule, settings.epsilon, {}, std::nullopt};
    if (settings.rule == Rule::glrt_cov) {
      if (a.model.empty() && settings.sigma == SigmaSource::sample) {
        throw ConfigError("glrt-cov with --sigma sample needs --model");
      }
      spec.sigma = settings.sigma == SigmaSource::sample ? load_model(a.model).sigma
                                                         : Eigen::MatrixXd::Identity(test.cols(), test.cols());
    }
    CombinerInput in;
    in.z = test.values();
    stats = combine(spec, in);
  } else {
    if (a.model.empty()) throw ConfigError("combine needs --model (or --z-input)");
    const auto model = load_model(a.model);
    test = prepare(model, std::move(test));
    stats = score_samples(model, make_combiner(model, settings), test);
  }

  auto settings_kv = combiner_settings(settings);
  settings_kv.emplace_back("z_input", a.z_input ? "1" : "0");
  const Provenance prov{"combine", config_hash(settings_kv), a.seed};
  std::vector<std::string> columns{"sample_id", "statistic", "rule"};
  if (test.has_labels()) columns.emplace_back("label");
  TableWriter table(format, prov, columns);
  for (Eigen::Index r = 0; r < test.rows(); ++r) {
    std::vector<std::string> cells{test.sample_ids()[r], format_double(stats[r]), std::string(rule_name(settings.rule))};
    std::vector<bool> numeric{false, true, false};
    if (test.has_labels()) {
      cells.emplace_back(label_name(test.labels()[r]));
      numeric.push_back(false);
    }
    table.row(cells, numeric);
  }
  write_file_atomic(a.out, table.str());
  out << "combined " << test.rows() << " samples with " << rule_name(settings.rule) << " -> " << a.out << "\n";
  return kOk;
}

struct CalibrateArgs {
  std::string val;
  std::string model;
  std::string out;
  std::string rule = "glrt";
  double epsilon = 0.25;
  std::string sigma = "sample";
  double alpha = 0.05;
  double delta = 0.1;
  std::uint64_t seed = 0;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const GuaranteeConfig guarantee{a.alpha, a.delta};
  guarantee.validate();
  const CombinerSettings settings{parse_rule(a.rule), a.epsilon, parse_sigma_source(a.sigma)};
  auto model = load_model(a.model);
  const auto spec = make_combiner(model, settings);
  const ScoreMatrix val = prepare(model, load_scores(a.val));
  if (val.digest() == model.transform.train_digest()) {
    throw ConfigError("validation data is identical to the training data the model was fitted on; "
                      "conformal calibration needs an independent validation set");
  }
  if (val.rows() < 1) throw DataError("validation file has no samples");
  auto calibration = calibrate(ValidationBank(score_samples(model, spec, val)), guarantee);
  CalibrationRecord rec{std::move(model), settings, std::move(calibration), val.digest()};
  auto kv = combiner_settings(settings);
  kv.emplace_back("alpha", format_double(a.alpha));
  kv.emplace_back("delta", format_double(a.delta));
  write_file_atomic(a.out, serialize_calibration(rec, {"calibrate", config_hash(kv), a.seed}));
  const auto& th = rec.calibration.threshold;
  out << "v=" << rec.calibration.bank.size() << " l=" << th.l << " a=" << format_double(th.a)
      << " alpha_min=" << format_double(th.alpha_min) << "\n";
  if (th.degenerate) {
    out << "warning: degenerate calibration (l=0): the validation set is too small for (alpha, delta); "
           "the detector never rejects\n";
  }
  return kOk;
}

struct DetectArgs {
  std::string calibration;
  std::string test;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 0;
};

int cmd_detect(const DetectArgs& a, std::ostream& out) {
  const auto format = parse_table_format(a.format);
  const auto rec = parse_calibration(read_file(a.calibration));
  const auto spec = make_combiner(rec.model, rec.combiner);
  const ScoreMatrix test = prepare(rec.model, load_scores(a.test));
  const Eigen::VectorXd stats = score_samples(rec.model, spec, test);

  auto kv = combiner_settings(rec.combiner);
  kv.emplace_back("a", format_double(rec.calibration.threshold.a));
  kv.emplace_back("validation_digest", hex64(rec.validation_digest));
  std::vector<std::string> columns{"sample_id", "statistic", "conformal_p", "decision"};
  if (test.has_labels()) columns.emplace_back("label");
  TableWriter table(format, {"detect", config_hash(kv), a.seed}, columns);
  Eigen::Index flagged = 0;
  for (Eigen::Index r = 0; r < test.rows(); ++r) {
    const auto d = detect(stats[r], rec.calibration);
    flagged += d == Decision::ood;
    std::vector<std::string> cells{test.sample_ids()[r], format_double(stats[r]),
                                   format_double(conformal_p(rec.calibration.bank, stats[r])), decision_name(d)};
    std::vector<bool> numeric{false, true, true, false};
    if (test.has_labels()) {
      cells.emplace_back(label_name(test.labels()[r]));
      numeric.push_back(false);
    }
    table.row(cells, numeric);
  }
  write_file_atomic(a.out, table.str());
  out << flagged << " of " << test.rows() << " samples flagged OOD -> " << a.out << "\n";
  return kOk;
}

struct EvaluateArgs {
  std::string stats;
  std::vector<double> alphas{0.05};
  std::string out;
  std::string roc_out;
  std::uint64_t seed = 0;
};

LabeledStatistics labeled_from(const ScoreMatrix& table, const std::string& column) {
  if (!table.has_labels()) throw SchemaError("statistics file needs a 'label' column");
  const auto col = table.column_index(column);
  if (!col) throw SchemaError("statistics file has no '" + column + "' column");
  table.require_finite();
  std::vector<double> in;
  std::vector<double> ood;
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    const double v = table.values()(r, *col);
    if (table.labels()[r] == Label::inlier) in.push_back(v);
    if (table.labels()[r] == Label::ood) ood.push_back(v);
  }
  if (in.empty() || ood.empty()) throw DataError("evaluation needs both inlier and ood rows");
  return {Eigen::Map<Eigen::VectorXd>(in.data(), static_cast<Eigen::Index>(in.size())),
          Eigen::Map<Eigen::VectorXd>(ood.data(), static_cast<Eigen::Index>(ood.size()))};
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  for (const double alpha : a.alphas) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("every alpha must lie in (0, 1)");
  }
  ReadOptions opts;
  opts.ignore_columns = {"rule", "decision", "conformal_p"};
  const auto table = load_scores(a.stats, opts);
  const auto d = labeled_from(table, "statistic");
  const Provenance prov{"evaluate", config_hash({{"alphas", join(a.alphas)}}), a.seed};

  ordered_json report = {{"provenance", {{"tool", "nmfuse " + std::string(kToolVersion)},
                                         {"command", prov.command},
                                         {"config_hash", hex64(prov.config_hash)},
                                         {"seed", prov.seed}}},
                         {"n_inlier", d.inlier.size()},
                         {"n_ood", d.ood.size()},
                         {"auroc", auroc(d).value()}};
  ordered_json rows = ordered_json::array();
  for (const double alpha : a.alphas) {
    const auto r = dr_at_far(d, alpha);
    ordered_json row = {{"alpha", alpha}, {"far", r.far}, {"dr", r.dr}, {"degenerate", r.degenerate}};
    row["threshold"] = r.degenerate ? ordered_json(nullptr) : ordered_json(r.threshold);
    rows.push_back(std::move(row));
    out << "DR@FAR<=" << format_double(alpha) << " = " << format_double(r.dr) << "\n";
  }
  report["dr_at_far"] = std::move(rows);
  write_file_atomic(a.out, report.dump(1) + "\n");
  out << "AUROC = " << format_double(report["auroc"].get<double>()) << "\n";

  if (!a.roc_out.empty()) {
    TableWriter roc(TableFormat::csv, prov, {"threshold", "far", "dr"});
    for (const auto& p : roc_curve(d)) {
      roc.row({std::isfinite(p.threshold) ? format_double(p.threshold) : "-inf", format_double(p.far),
               format_double(p.dr)},
              {true, true, true});
    }
    write_file_atomic(a.roc_out, roc.str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Scenario configuration (JSON):
// {
//   "seed": 7, "far_alpha": 0.05, "bootstrap": 200,
//   "combiners": [{"rule": "glrt", "epsilon": 0.25, "label": "glrt"}, ...],
//   "scenarios": [{"name": "dense", "kind": "dense|sparse|null", "m": 12,
//                  "shift": -0.5, "k": 1, "mu": [...], "correlation": [[...]]
//                  or {"ar1": 0.5}, "epsilon": 0.25, "n_h0": 10000,
//                  "n_h1": 10000, "seed": 1}]
// }

struct SimulationConfig {
  std::vector<NmScenario> scenarios;
  std::vector<NamedCombiner> combiners;
  PowerSweepOptions options;
  std::uint64_t seed = 0;
};

std::vector<NamedCombiner> default_combiners() {
  std::vector<NamedCombiner> out;
  for (const Rule r : {Rule::glrt, Rule::stouffer, Rule::fisher, Rule::bonferroni, Rule::simes, Rule::alr}) {
    out.push_back({std::string(rule_name(r)), CombinerSpec{r, 0.25, {}, std::nullopt}});
  }
  return out;
}

NmScenario scenario_from_json(const ordered_json& j, std::size_t index, std::uint64_t base_seed) {
  NmScenario s;
  s.name = j.value("name", "scenario-" + std::to_string(index));
  const std::string kind = j.value("kind", "dense");
  const auto m = j.value("m", Eigen::Index{12});
  const double shift = j.value("shift", -0.5);
  if (m < 1) throw ConfigError("scenario '" + s.name + "': m must be >= 1");
  if (kind == "dense") {
    s.kind = ScenarioKind::dense;
    s.mu = Eigen::VectorXd::Constant(m, shift);
  } else if (kind == "sparse") {
    s.kind = ScenarioKind::sparse;
    const auto k = j.value("k", Eigen::Index{1});
    if (k < 1 || k > m) throw ConfigError("scenario '" + s.name + "': need 1 <= k <= m");
    s.mu = Eigen::VectorXd::Zero(m);
    s.mu.head(k).setConstant(shift);
  } else if (kind == "null") {
    s.kind = ScenarioKind::null;
    s.mu = Eigen::VectorXd::Zero(m);
  } else {
    throw ConfigError("scenario '" + s.name + "': unknown kind '" + kind + "'");
  }
  if (j.contains("mu")) {
    const auto mu = j.at("mu").get<std::vector<double>>();
    s.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  }
  if (j.contains("correlation")) {
    const auto& c = j.at("correlation");
    if (c.is_object()) {
      s.correlation = ar1_correlation(s.mu.size(), c.at("ar1").get<double>());
    } else {
      const auto rows = static_cast<Eigen::Index>(c.size());
      s.correlation.resize(rows, rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(c.at(r).size()) != rows) {
          throw ConfigError("scenario '" + s.name + "': correlation must be square");
        }
        for (Eigen::Index k = 0; k < rows; ++k) s.correlation(r, k) = c.at(r).at(k).get<double>();
      }
    }
  }
  s.epsilon = j.value("epsilon", 0.25);
  const auto n = j.value("n", Eigen::Index{10000});
  s.n_h0 = j.value("n_h0", n);
  s.n_h1 = j.value("n_h1", n);
  s.seed = j.value("seed", base_seed + index);
  s.validate();
  return s;
}

SimulationConfig load_simulation_config(const std::string& path, std::uint64_t seed_flag, bool seed_given) {
  SimulationConfig cfg;
  if (path.empty()) {
    cfg.seed = seed_flag;
    cfg.scenarios = default_scenarios(10000, cfg.seed);
    cfg.combiners = default_combiners();
    return cfg;
  }
  ordered_json j;
  try {
    j = ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario config '" + path + "': " + e.what());
  }
  try {
    cfg.seed = seed_given ? seed_flag : j.value("seed", std::uint64_t{0});
    cfg.options.far_alpha = j.value("far_alpha", 0.05);
    cfg.options.bootstrap_resamples = j.value("bootstrap", 200);
    if (!(cfg.options.far_alpha > 0.0 && cfg.options.far_alpha < 1.0)) throw ConfigError("far_alpha must lie in (0, 1)");
    if (j.contains("combiners")) {
      for (const auto& c : j.at("combiners")) {
        const Rule rule = parse_rule(c.at("rule").get<std::string>());
        if (rule == Rule::csi) throw ConfigError("csi needs raw scores and cannot run on synthetic z-values");
        CombinerSpec spec{rule, c.value("epsilon", 0.25), {}, std::nullopt};
        cfg.combiners.push_back({c.value("label", std::string(rule_name(rule))), std::move(spec)});
      }
    } else {
      cfg.combiners = default_combiners();
    }
    if (j.contains("scenarios")) {
      std::size_t i = 0;
      for (const auto& s : j.at("scenarios")) cfg.scenarios.push_back(scenario_from_json(s, i++, cfg.seed));
    } else {
      cfg.scenarios = default_scenarios(10000, cfg.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario config '" + path + "': " + e.what());
  }
  return cfg;
}

struct SimulateArgs {
  std::string scenarios;
  std::string out;
  std::string json_out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const auto cfg = load_simulation_config(a.scenarios, a.seed, a.seed_given);
  const auto rows = power_sweep(cfg.scenarios, cfg.combiners, cfg.options);
  std::vector<std::pair<std::string, std::string>> kv{{"far_alpha", format_double(cfg.options.far_alpha)},
                                                      {"bootstrap", std::to_string(cfg.options.bootstrap_resamples)}};
  for (const auto& s : cfg.scenarios) kv.emplace_back("scenario", s.name);
  for (const auto& c : cfg.combiners) kv.emplace_back("combiner", c.label + "/" + format_double(c.spec.epsilon));
  const Provenance prov{"simulate", config_hash(kv), cfg.seed};
  TableWriter table(TableFormat::csv, prov, {"scenario", "combiner", "auroc", "auroc_se", "far_alpha", "dr"});
  ordered_json j = ordered_json::array();
  for (const auto& r : rows) {
    table.row({r.scenario, r.combiner, format_double(r.auroc), format_double(r.auroc_se), format_double(r.far_alpha),
               format_double(r.dr)},
              {false, false, true, true, true, true});
    j.push_back({{"scenario", r.scenario},
                 {"combiner", r.combiner},
                 {"auroc", r.auroc},
                 {"auroc_se", r.auroc_se},
                 {"far_alpha", r.far_alpha},
                 {"dr", r.dr}});
  }
  write_file_atomic(a.out, table.str());
  if (!a.json_out.empty()) {
    ordered_json doc = {{"provenance", {{"tool", "nmfuse " + std::string(kToolVersion)},
                                        {"command", prov.command},
                                        {"config_hash", hex64(prov.config_hash)},
                                        {"seed", prov.seed}}},
                        {"rows", std::move(j)}};
    write_file_atomic(a.json_out, doc.dump(1) + "\n");
  }
  out << rows.size() << " rows -> " << a.out << "\n";
  return kOk;
}

struct EpsSweepArgs {
  std::string scenarios;
  std::vector<double> epsilons{0.0, 0.25, 0.5, 1.0};
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int cmd_eps_sweep(const EpsSweepArgs& a, std::ostream& out) {
  const auto cfg = load_simulation_config(a.scenarios, a.seed, a.seed_given);
  const auto dense = std::find_if(cfg.scenarios.begin(), cfg.scenarios.end(),
                                  [](const NmScenario& s) { return s.kind == ScenarioKind::dense; });
  if (dense == cfg.scenarios.end()) throw ConfigError("eps-sweep needs a dense scenario");
  for (const double e : a.epsilons) {
    if (!std::isfinite(e) || e < 0.0) throw ConfigError("epsilons must be finite and >= 0");
  }
  const auto points = epsilon_sweep(*dense, a.epsilons);
  const Provenance prov{"eps-sweep", config_hash({{"scenario", dense->name}, {"epsilons", join(a.epsilons)}}), cfg.seed};
  TableWriter table(TableFormat::csv, prov, {"scenario", "epsilon", "auroc"});
  for (const auto& p : points) {
    table.row({dense->name, format_double(p.epsilon), format_double(p.auroc)}, {false, true, true});
  }
  write_file_atomic(a.out, table.str());
  out << points.size() << " epsilon values on " << dense->name << " -> " << a.out << "\n";
  return kOk;
}

struct EigenArgs {
  std::string train;
  std::string test;
  std::string out;
  double epsilon = 0.25;
  double sigma_ridge = 1e-6;
  std::string metric = "identity";
  std::vector<std::string> negate;
  std::uint64_t seed = 0;
};

int cmd_eigen(const EigenArgs& a, std::ostream& out) {
  EigenMetric metric = EigenMetric::identity;
  if (a.metric == "sample") {
    metric = EigenMetric::sample_covariance;
  } else if (a.metric != "identity") {
    throw ConfigError("metric must be 'identity' or 'sample'");
  }
  FitOptions opts;
  opts.negate = a.negate;
  opts.sigma_ridge = a.sigma_ridge;
  ScoreMatrix train = load_scores(a.train);
  const auto model = fit_model(train, opts);
  train.negate_columns(a.negate);
  const ScoreMatrix test = prepare(model, load_scores(a.test));
  if (!test.has_labels()) throw SchemaError("eigen test file needs a 'label' column");
  const auto& t = model.transform;
  const auto table = eigen_analysis(t.transform_matrix(train), t.transform_matrix(test.rows_with_label(Label::inlier)),
                                    t.transform_matrix(test.rows_with_label(Label::ood)), a.epsilon, a.sigma_ridge,
                                    metric);
  const Provenance prov{"eigen",
                        config_hash({{"epsilon", format_double(a.epsilon)},
                                     {"sigma_ridge", format_double(a.sigma_ridge)},
                                     {"metric", a.metric},
                                     {"negate", join(a.negate)}}),
                        a.seed};
  std::vector<std::string> columns{"k", "eigenvalue", "auroc"};
  for (const auto& name : t.column_names()) columns.push_back("v_" + name);
  TableWriter csv(TableFormat::csv, prov, columns);
  for (Eigen::Index k = 0; k < table.eigenvalues.size(); ++k) {
    std::vector<std::string> cells{std::to_string(k + 1), format_double(table.eigenvalues[k]),
                                   format_double(table.auroc[k])};
    for (Eigen::Index i = 0; i < t.m(); ++i) cells.push_back(format_double(table.eigenvectors(i, k)));
    csv.row(cells, std::vector<bool>(cells.size(), true));
  }
  write_file_atomic(a.out, csv.str());
  if (table.eigenvalues.size() >= 2) {
    out << "spearman(auroc, eigenvalue) = " << format_double(spearman(table.auroc, table.eigenvalues)) << "\n";
  }
  out << table.eigenvalues.size() << " eigen-scores -> " << a.out << "\n";
  return kOk;
}

struct CurvesArgs {
  std::string out;
  double far = 0.1;
  std::vector<double> epsilons{0.0, 0.1, 0.2, 0.3};
  double z_min = -4.0;
  double z_max = 3.0;
  int points = 701;
  std::uint64_t seed = 0;
};

// Calibrated single-score curves: GLRT for each epsilon, Stouffer and Fisher.
int cmd_curves(const CurvesArgs& a, std::ostream& out) {
  if (a.points < 2 || !(a.z_max > a.z_min)) throw ConfigError("need at least 2 grid points and z_max > z_min");
  std::vector<double> grid(static_cast<std::size_t>(a.points));
  for (int i = 0; i < a.points; ++i) grid[i] = a.z_min + (a.z_max - a.z_min) * i / (a.points - 1);
  std::vector<std::pair<std::string, std::function<double(double)>>> stats;
  for (const double eps : a.epsilons) {
    const GlrtConfig cfg{eps};
    cfg.validate();
    stats.emplace_back("glrt-" + format_double(eps), [cfg](double z) {
      return glrt_statistic(Eigen::Matrix<double, 1, 1>::Constant(z), cfg);
    });
  }
  stats.emplace_back("stouffer", [](double z) { return z; });
  stats.emplace_back("fisher", [](double z) { return std::log(std_normal_cdf(z).value()); });
  const Provenance prov{"curves",
                        config_hash({{"far", format_double(a.far)},
                                     {"epsilons", join(a.epsilons)},
                                     {"grid", format_double(a.z_min) + ":" + format_double(a.z_max) + ":" +
                                                  std::to_string(a.points)}}),
                        a.seed};
  TableWriter table(TableFormat::csv, prov, {"statistic", "z", "raw", "calibrated"});
  for (const auto& [name, fn] : stats) {
    const auto curve = calibrated_curve(fn, a.far, grid);
    for (std::size_t i = 0; i < curve.size(); ++i) {
      table.row({name, format_double(curve[i].z), format_double(fn(grid[i])), format_double(curve[i].value)},
                {false, true, true, true});
    }
  }
  write_file_atomic(a.out, table.str());
  out << stats.size() << " calibrated curves -> " << a.out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"nmfuse: fuse per-sample inlier scores into one out-of-distribution decision", "nmfuse"};
  app.set_config("--config", "", "TOML/INI file whose keys mirror the command-line flags");
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit empirical z-transforms (and covariance, CSI weights) on inlier scores");
  fit_cmd->add_option("--train", fit.train, "Inlier training score file (CSV or NDJSON)")->required();
  fit_cmd->add_option("--out", fit.out, "Model file to write")->required();
  fit_cmd->add_option("--negate", fit.negate, "Score columns to negate (outlier-oriented sources)")->delimiter(',');
  fit_cmd->add_option("--csi-group", fit.csi_groups, "CSI column triple cos:norm:shift (repeatable)");
  fit_cmd->add_option("--sigma-ridge", fit.sigma_ridge, "Ridge added to the sample covariance");
  fit_cmd->add_option("--seed", fit.seed, "Seed recorded in the output header");

  CombineArgs comb;
  auto* comb_cmd = app.add_subcommand("combine", "Compute one combined statistic per test sample");
  comb_cmd->add_option("--model,--transform", comb.model, "Model file from `fit`");
  comb_cmd->add_option("--test", comb.test, "Test score file")->required();
  comb_cmd->add_option("--rule", comb.rule, "glrt|fisher|bonferroni|simes|stouffer|alr|csi|glrt-cov");
  comb_cmd->add_option("--epsilon", comb.epsilon, "Negative-means margin");
  comb_cmd->add_option("--sigma", comb.sigma, "Covariance for glrt-cov: sample|identity");
  comb_cmd->add_option("--format", comb.format, "Output format: csv|ndjson");
  comb_cmd->add_flag("--z-input", comb.z_input, "Test columns already hold z-values");
  comb_cmd->add_option("--out", comb.out, "Statistics file to write")->required();
  comb_cmd->add_option("--seed", comb.seed, "Seed recorded in the output header");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Conformal threshold with a (alpha, delta) false-alarm guarantee");
  cal_cmd->alias("calibrate-conformal");
  cal_cmd->add_option("--val", cal.val, "Inlier validation score file, disjoint from training")->required();
  cal_cmd->add_option("--model,--transform", cal.model, "Model file from `fit`")->required();
  cal_cmd->add_option("--rule", cal.rule, "Combining rule");
  cal_cmd->add_option("--epsilon", cal.epsilon, "Negative-means margin");
  cal_cmd->add_option("--sigma", cal.sigma, "Covariance for glrt-cov: sample|identity");
  cal_cmd->add_option("--alpha", cal.alpha, "Maximum false-alarm rate");
  cal_cmd->add_option("--delta", cal.delta, "Maximum failure probability");
  cal_cmd->add_option("--out", cal.out, "Calibration file to write")->required();
  cal_cmd->add_option("--seed", cal.seed, "Seed recorded in the output header");

  DetectArgs det;
  auto* det_cmd = app.add_subcommand("detect", "Flag test samples using a conformal calibration");
  det_cmd->add_option("--calibration", det.calibration, "Calibration file from `calibrate`")->required();
  det_cmd->add_option("--test", det.test, "Test score file")->required();
  det_cmd->add_option("--format", det.format, "Output format: csv|ndjson");
  det_cmd->add_option("--out", det.out, "Decision file to write")->required();
  det_cmd->add_option("--seed", det.seed, "Seed recorded in the output header");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "AUROC and detection rate at fixed false-alarm rates");
  ev_cmd->add_option("--stats", ev.stats, "Labelled statistics file (from `combine`)")->required();
  ev_cmd->add_option("--alpha-list,--alpha", ev.alphas, "Target false-alarm rates")->delimiter(',');
  ev_cmd->add_option("--out", ev.out, "JSON report to write")->required();
  ev_cmd->add_option("--roc-out", ev.roc_out, "Optional ROC plot-data CSV");
  ev_cmd->add_option("--seed", ev.seed, "Seed recorded in the output header");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Synthetic negative-means power sweep over combiners");
  sim_cmd->add_option("--scenarios,--config-scenarios", sim.scenarios, "Scenario config (JSON); default suite if omitted");
  sim_cmd->add_option("--out", sim.out, "CSV table to write")->required();
  sim_cmd->add_option("--json-out", sim.json_out, "Optional JSON copy of the table");
  auto* sim_seed = sim_cmd->add_option("--seed", sim.seed, "Base seed (overrides the config)");

  EpsSweepArgs eps;
  auto* eps_cmd = app.add_subcommand("eps-sweep", "GLRT AUROC versus epsilon on a dense scenario");
  eps_cmd->add_option("--scenarios", eps.scenarios, "Scenario config; first dense scenario is used");
  eps_cmd->add_option("--epsilons", eps.epsilons, "Epsilon grid")->delimiter(',');
  eps_cmd->add_option("--out", eps.out, "CSV to write")->required();
  auto* eps_seed = eps_cmd->add_option("--seed", eps.seed, "Base seed (overrides the config)");

  EigenArgs eig;
  auto* eig_cmd = app.add_subcommand("eigen", "AUROC of GLRT eigen-scores versus covariance eigenvalues");
  eig_cmd->add_option("--train", eig.train, "Inlier training score file")->required();
  eig_cmd->add_option("--test", eig.test, "Labelled test score file")->required();
  eig_cmd->add_option("--epsilon", eig.epsilon, "Negative-means margin");
  eig_cmd->add_option("--sigma-ridge", eig.sigma_ridge, "Ridge added to the sample covariance");
  eig_cmd->add_option("--metric", eig.metric, "Projection metric for mu*: identity|sample");
  eig_cmd->add_option("--negate", eig.negate, "Score columns to negate")->delimiter(',');
  eig_cmd->add_option("--out", eig.out, "CSV to write")->required();
  eig_cmd->add_option("--seed", eig.seed, "Seed recorded in the output header");

  CurvesArgs cur;
  auto* cur_cmd = app.add_subcommand("curves", "Calibrated single-score statistic curves (plot data)");
  cur_cmd->add_option("--far", cur.far, "False-alarm rate fixing the zero crossing");
  cur_cmd->add_option("--epsilons", cur.epsilons, "GLRT margins")->delimiter(',');
  cur_cmd->add_option("--z-min", cur.z_min);
  cur_cmd->add_option("--z-max", cur.z_max);
  cur_cmd->add_option("--points", cur.points);
  cur_cmd->add_option("--out", cur.out, "CSV to write")->required();
  cur_cmd->add_option("--seed", cur.seed, "Seed recorded in the output header");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*comb_cmd) return cmd_combine(comb, out);
    if (*cal_cmd) return cmd_calibrate(cal, out);
    if (*det_cmd) return cmd_detect(det, out);
    if (*ev_cmd) return cmd_evaluate(ev, out);
    if (*sim_cmd) {
      sim.seed_given = sim_seed->count() > 0;
      return cmd_simulate(sim, out);
    }
    if (*eps_cmd) {
      eps.seed_given = eps_seed->count() > 0;
      return cmd_eps_sweep(eps, out);
    }
    if (*eig_cmd) return cmd_eigen(eig, out);
    if (*cur_cmd) return cmd_curves(cur, out);
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}

}  // namespace nmfuse::cli
