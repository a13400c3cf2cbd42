#pragma once

// Score-matrix interchange.
//
// CSV: a mandatory header `sample_id,<score columns...>[,label]`, one sample
// per line, '.' decimal separator, scientific notation accepted. Lines
// starting with '#' are comments (tool outputs use one for provenance).
//
// NDJSON: one JSON object per line with the same field names; score fields
// are numbers, `label` (optional) is "inlier" | "ood" | "unknown". Objects
// carrying a "_header" key are provenance records and skipped.

#include "nmfuse/score_matrix.hpp"

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>

namespace nmfuse {

enum class TableFormat { csv, ndjson };

// Throws ConfigError for anything but "csv" / "ndjson".
TableFormat parse_table_format(std::string_view text);
std::string_view table_format_name(TableFormat f);
// .ndjson / .jsonl / .json -> ndjson, everything else csv.
TableFormat format_from_extension(const std::filesystem::path& path);

struct ReadOptions {
  // Non-numeric columns to drop (e.g. "rule" in statistics files).
  std::set<std::string> ignore_columns;
};

// Parse errors throw SchemaError naming the source and line.
ScoreMatrix parse_scores_csv(std::istream& in, std::string_view source, const ReadOptions& opts = {});
ScoreMatrix parse_scores_ndjson(std::istream& in, std::string_view source, const ReadOptions& opts = {});
// Throws IoError if the file cannot be opened.
ScoreMatrix read_scores(const std::filesystem::path& path, TableFormat format, const ReadOptions& opts = {});
ScoreMatrix read_scores(const std::filesystem::path& path, const ReadOptions& opts = {});

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// Writes via a temporary sibling file and rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace nmfuse
