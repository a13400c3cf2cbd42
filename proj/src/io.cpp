#include "nmfuse/io.hpp"

#include "nmfuse/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <vector>

namespace nmfuse {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

bool parse_number(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

// Accumulates rows, then assembles the matrix.
struct Builder {
  std::vector<std::string> columns;
  std::vector<std::string> ids;
  std::vector<double> cells;
  std::vector<Label> labels;
  bool has_label = false;

  ScoreMatrix finish() {
    const auto n = static_cast<Eigen::Index>(ids.size());
    const auto m = static_cast<Eigen::Index>(columns.size());
    Eigen::MatrixXd values(n, m);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < m; ++c) values(r, c) = cells[static_cast<std::size_t>(r * m + c)];
    }
    return ScoreMatrix(std::move(ids), std::move(columns), std::move(values),
                       has_label ? std::move(labels) : std::vector<Label>{});
  }
};

}  // namespace

TableFormat parse_table_format(std::string_view text) {
  if (text == "csv") return TableFormat::csv;
  if (text == "ndjson") return TableFormat::ndjson;
  throw ConfigError("format must be 'csv' or 'ndjson', got '" + std::string(text) + "'");
}

std::string_view table_format_name(TableFormat f) { return f == TableFormat::csv ? "csv" : "ndjson"; }

TableFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ndjson" || ext == ".jsonl" || ext == ".json") return TableFormat::ndjson;
  return TableFormat::csv;
}

ScoreMatrix parse_scores_csv(std::istream& in, std::string_view source, const ReadOptions& opts) {
  Builder b;
  std::vector<int> role;  // per field: -1 id, -2 label, -3 ignored, else score column index
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto fields = split_fields(text);
    if (!have_header) {
      if (fields.front() != "sample_id") {
        throw SchemaError(where(source, line_no) + "missing header: the first line must start with 'sample_id'");
      }
      role.push_back(-1);
      for (std::size_t i = 1; i < fields.size(); ++i) {
        const std::string name(fields[i]);
        if (name.empty()) throw SchemaError(where(source, line_no) + "empty column name in header");
        if (name == "sample_id") throw SchemaError(where(source, line_no) + "duplicate 'sample_id' column");
        if (name == "label") {
          if (b.has_label) throw SchemaError(where(source, line_no) + "duplicate 'label' column");
          b.has_label = true;
          role.push_back(-2);
        } else if (opts.ignore_columns.contains(name)) {
          role.push_back(-3);
        } else {
          role.push_back(static_cast<int>(b.columns.size()));
          b.columns.push_back(name);
        }
      }
      if (b.columns.empty()) throw SchemaError(where(source, line_no) + "header has no score columns");
      have_header = true;
      continue;
    }
    if (fields.size() != role.size()) {
      throw SchemaError(where(source, line_no) + "expected " + std::to_string(role.size()) + " fields, found " +
                        std::to_string(fields.size()));
    }
    const std::size_t base = b.cells.size();
    b.cells.resize(base + b.columns.size());
    Label label = Label::unknown;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (role[i] == -1) {
        b.ids.emplace_back(fields[i]);
      } else if (role[i] == -2) {
        try {
          label = parse_label(fields[i]);
        } catch (const SchemaError& e) {
          throw SchemaError(where(source, line_no) + e.what());
        }
      } else if (role[i] >= 0) {
        double value = 0.0;
        if (!parse_number(fields[i], value)) {
          throw SchemaError(where(source, line_no) + "column '" + b.columns[role[i]] + "' has non-numeric value '" +
                            std::string(fields[i]) + "'");
        }
        b.cells[base + static_cast<std::size_t>(role[i])] = value;
      }
    }
    b.labels.push_back(label);
  }
  if (!have_header) throw SchemaError(std::string(source) + ": missing header (no data lines)");
  return b.finish();
}

ScoreMatrix parse_scores_ndjson(std::istream& in, std::string_view source, const ReadOptions& opts) {
  using nlohmann::ordered_json;
  Builder b;
  std::string line;
  std::size_t line_no = 0;
  bool have_columns = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    ordered_json obj;
    try {
      obj = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(where(source, line_no) + "invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw SchemaError(where(source, line_no) + "each line must be a JSON object");
    if (obj.contains("_header")) continue;
    if (!obj.contains("sample_id")) throw SchemaError(where(source, line_no) + "missing 'sample_id' field");
    if (!have_columns) {
      for (const auto& [key, value] : obj.items()) {
        if (key == "sample_id" || opts.ignore_columns.contains(key)) continue;
        if (key == "label") {
          b.has_label = true;
          continue;
        }
        b.columns.push_back(key);
      }
      if (b.columns.empty()) throw SchemaError(where(source, line_no) + "no score fields");
      have_columns = true;
    }
    std::size_t seen = 0;
    for (const auto& [key, value] : obj.items()) {
      if (key == "sample_id" || key == "label" || opts.ignore_columns.contains(key)) continue;
      ++seen;
    }
    if (seen != b.columns.size() || obj.contains("label") != b.has_label) {
      throw SchemaError(where(source, line_no) + "fields differ from the first record");
    }
    const auto& id = obj["sample_id"];
    if (id.is_string()) {
      b.ids.push_back(id.get<std::string>());
    } else if (id.is_number_integer()) {
      b.ids.push_back(id.dump());
    } else {
      throw SchemaError(where(source, line_no) + "'sample_id' must be a string or integer");
    }
    for (const auto& name : b.columns) {
      if (!obj.contains(name)) throw SchemaError(where(source, line_no) + "missing field '" + name + "'");
      const auto& v = obj[name];
      if (v.is_number()) {
        b.cells.push_back(v.get<double>());
      } else if (v.is_null()) {
        b.cells.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        throw SchemaError(where(source, line_no) + "column '" + name + "' has non-numeric value " + v.dump());
      }
    }
    Label label = Label::unknown;
    if (b.has_label) {
      const auto& l = obj["label"];
      if (!l.is_string()) throw SchemaError(where(source, line_no) + "'label' must be a string");
      try {
        label = parse_label(l.get<std::string>());
      } catch (const SchemaError& e) {
        throw SchemaError(where(source, line_no) + e.what());
      }
    }
    b.labels.push_back(label);
  }
  if (!have_columns) throw SchemaError(std::string(source) + ": no records");
  return b.finish();
}

ScoreMatrix read_scores(const std::filesystem::path& path, TableFormat format, const ReadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return format == TableFormat::csv ? parse_scores_csv(in, path.string(), opts)
                                    : parse_scores_ndjson(in, path.string(), opts);
}

ScoreMatrix read_scores(const std::filesystem::path& path, const ReadOptions& opts) {
  return read_scores(path, format_from_extension(path), opts);
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move output into place at '" + path.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace nmfuse
