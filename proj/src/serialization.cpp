#include "nmfuse/serialization.hpp"

#include "nmfuse/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nmfuse {
namespace {

using nlohmann::ordered_json;

constexpr std::string_view kModelFormat = "nmfuse-model";
constexpr std::string_view kCalibrationFormat = "nmfuse-calibration";
constexpr int kVersion = 1;

ordered_json provenance_json(const Provenance& prov) {
  return {{"tool", "nmfuse " + std::string(kToolVersion)},
          {"command", prov.command},
          {"config_hash", hex64(prov.config_hash)},
          {"seed", prov.seed}};
}

std::uint64_t parse_hex64(const std::string& text) {
  if (text.size() != 16) throw DataError("malformed digest '" + text + "'");
  std::uint64_t value = 0;
  for (const char c : text) {
    value <<= 4;
    if (c >= '0' && c <= '9') {
      value |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      value |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw DataError("malformed digest '" + text + "'");
    }
  }
  return value;
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (static_cast<Eigen::Index>(row.size()) != rows) throw DataError("covariance matrix is not square");
    for (Eigen::Index c = 0; c < rows; ++c) m(r, c) = row.at(c).get<double>();
  }
  return m;
}

void check_header(const ordered_json& j, std::string_view format) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw DataError("not a " + std::string(format) + " document");
  }
  if (j.at("version").get<int>() != kVersion) {
    throw DataError("unsupported " + std::string(format) + " version " + j.at("version").dump());
  }
}

ordered_json model_json(const FittedModel& model) {
  const auto& t = model.transform;
  ordered_json columns = ordered_json::array();
  for (Eigen::Index c = 0; c < t.m(); ++c) {
    const auto col = t.sorted_column(c);
    columns.push_back({{"name", t.column_names()[c]}, {"sorted", std::vector<double>(col.begin(), col.end())}});
  }
  ordered_json j = {{"n", t.n()},
                    {"train_digest", hex64(t.train_digest())},
                    {"negate", model.negate},
                    {"columns", std::move(columns)},
                    {"sigma_ridge", model.sigma_ridge},
                    {"sigma", matrix_json(model.sigma)}};
  if (model.csi) {
    ordered_json groups = ordered_json::array();
    for (const auto& g : model.csi->groups) {
      groups.push_back({{"cos", g.columns.cos},
                        {"norm", g.columns.norm},
                        {"shift", g.columns.shift},
                        {"lambda_con", g.lambda_con},
                        {"lambda_shift", g.lambda_shift}});
    }
    j["csi"] = std::move(groups);
  }
  return j;
}

FittedModel model_from_json(const ordered_json& j) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> sorted;
  for (const auto& col : j.at("columns")) {
    names.push_back(col.at("name").get<std::string>());
    sorted.push_back(col.at("sorted").get<std::vector<double>>());
  }
  FittedModel model{ZTransform::from_sorted_columns(std::move(names), std::move(sorted),
                                                    parse_hex64(j.at("train_digest").get<std::string>())),
                    j.at("negate").get<std::vector<std::string>>(), j.at("sigma_ridge").get<double>(),
                    matrix_from_json(j.at("sigma")), std::nullopt};
  if (model.transform.n() != j.at("n").get<Eigen::Index>()) throw DataError("model sample count disagrees with data");
  if (model.sigma.rows() != model.transform.m()) throw DataError("model covariance has the wrong dimension");
  if (j.contains("csi")) {
    CsiWeights w;
    for (const auto& g : j.at("csi")) {
      w.groups.push_back({{g.at("cos").get<std::string>(), g.at("norm").get<std::string>(),
                           g.at("shift").get<std::string>()},
                          g.at("lambda_con").get<double>(),
                          g.at("lambda_shift").get<double>()});
    }
    try {
      w.validate();
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("model CSI weights: ") + e.what());
    }
    model.csi = std::move(w);
  }
  return model;
}

template <typename Fn>
auto guarded(std::string_view what, Fn&& fn) {
  try {
    return fn();
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("corrupted " + std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string serialize_model(const FittedModel& model, const Provenance& prov) {
  ordered_json j = {{"format", kModelFormat}, {"version", kVersion}, {"provenance", provenance_json(prov)}};
  j["model"] = model_json(model);
  return j.dump(1) + "\n";
}

FittedModel parse_model(std::string_view text) {
  return guarded("model file", [&] {
    const auto j = ordered_json::parse(text);
    check_header(j, kModelFormat);
    return model_from_json(j.at("model"));
  });
}

std::string serialize_calibration(const CalibrationRecord& record, const Provenance& prov) {
  const auto& cal = record.calibration;
  const auto bank = cal.bank.sorted();
  ordered_json j = {{"format", kCalibrationFormat}, {"version", kVersion}, {"provenance", provenance_json(prov)}};
  j["combiner"] = {{"rule", rule_name(record.combiner.rule)},
                   {"epsilon", record.combiner.epsilon},
                   {"sigma", sigma_source_name(record.combiner.sigma)}};
  j["guarantee"] = {{"alpha", cal.guarantee.alpha}, {"delta", cal.guarantee.delta}};
  j["threshold"] = {{"a", cal.threshold.a},
                    {"l", cal.threshold.l},
                    {"alpha_min", cal.threshold.alpha_min},
                    {"degenerate", cal.threshold.degenerate}};
  j["validation_digest"] = hex64(record.validation_digest);
  j["bank"] = std::vector<double>(bank.begin(), bank.end());
  j["model"] = model_json(record.model);
  return j.dump(1) + "\n";
}

CalibrationRecord parse_calibration(std::string_view text) {
  return guarded("calibration file", [&] {
    const auto j = ordered_json::parse(text);
    check_header(j, kCalibrationFormat);
    CalibrationRecord rec{model_from_json(j.at("model")),
                          {parse_rule(j.at("combiner").at("rule").get<std::string>()),
                           j.at("combiner").at("epsilon").get<double>(),
                           parse_sigma_source(j.at("combiner").at("sigma").get<std::string>())},
                          {ValidationBank(j.at("bank").get<std::vector<double>>()),
                           {j.at("threshold").at("a").get<double>(), j.at("threshold").at("l").get<Eigen::Index>(),
                            j.at("threshold").at("alpha_min").get<double>(),
                            j.at("threshold").at("degenerate").get<bool>()},
                           {j.at("guarantee").at("alpha").get<double>(), j.at("guarantee").at("delta").get<double>()}},
                          parse_hex64(j.at("validation_digest").get<std::string>())};
    const auto& cal = rec.calibration;
    cal.guarantee.validate();
    const auto stored = j.at("bank").get<std::vector<double>>();
    if (!std::is_sorted(stored.begin(), stored.end())) throw DataError("calibration bank is not sorted");
    const auto expected = find_threshold(cal.bank.size(), cal.guarantee);
    if (expected.l != cal.threshold.l || expected.degenerate != cal.threshold.degenerate ||
        expected.a != cal.threshold.a) {
      throw DataError("calibration threshold is inconsistent with its bank size and guarantee");
    }
    return rec;
  });
}

}  // namespace nmfuse
