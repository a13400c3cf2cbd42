#pragma once

// Seeded score-matrix fixtures written to a scratch directory.

#include "nmfuse/io.hpp"
#include "nmfuse/rng.hpp"
#include "nmfuse/score_matrix.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace fixture {

namespace fs = std::filesystem;

// Three raw inlier scores with different marginals: a normal, an exponential
// and an outlier-oriented (higher = more anomalous) score.
inline nmfuse::ScoreMatrix scores(int n, std::uint64_t seed, double ood_fraction) {
  nmfuse::RngStream rng(seed, 0);
  std::vector<std::string> ids;
  Eigen::MatrixXd v(n, 3);
  std::vector<nmfuse::Label> labels;
  for (int i = 0; i < n; ++i) {
    const bool ood = rng.uniform() < ood_fraction;
    const double shift = ood ? 1.2 : 0.0;
    ids.push_back("s" + std::to_string(seed) + "-" + std::to_string(i));
    v(i, 0) = rng.normal() - shift;
    v(i, 1) = -std::log(rng.uniform()) * (ood ? 0.4 : 1.0);
    v(i, 2) = rng.normal() + shift;
    labels.push_back(ood_fraction > 0 ? (ood ? nmfuse::Label::ood : nmfuse::Label::inlier) : nmfuse::Label::unknown);
  }
  return nmfuse::ScoreMatrix(ids, {"energy", "margin", "distance"}, v,
                             ood_fraction > 0 ? labels : std::vector<nmfuse::Label>{});
}

inline std::string to_csv(const nmfuse::ScoreMatrix& m) {
  std::string out = "sample_id";
  for (const auto& c : m.column_names()) out += "," + c;
  if (m.has_labels()) out += ",label";
  out += "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += m.sample_ids()[r];
    for (Eigen::Index c = 0; c < m.cols(); ++c) out += "," + nmfuse::format_double(m.values()(r, c));
    if (m.has_labels()) out += "," + std::string(nmfuse::label_name(m.labels()[r]));
    out += "\n";
  }
  return out;
}

inline std::string to_ndjson(const nmfuse::ScoreMatrix& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += "{\"sample_id\":\"" + m.sample_ids()[r] + "\"";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out += ",\"" + m.column_names()[c] + "\":" + nmfuse::format_double(m.values()(r, c));
    }
    if (m.has_labels()) out += ",\"label\":\"" + std::string(nmfuse::label_name(m.labels()[r])) + "\"";
    out += "}\n";
  }
  return out;
}

// Fresh, empty scratch directory under the system temp dir.
inline fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("nmfuse-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace fixture
