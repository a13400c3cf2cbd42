#pragma once

// Versioned JSON documents for a fitted model and a conformal calibration.
// Parsing failures of any kind (bad JSON, wrong format tag or version,
// inconsistent content) throw DataError.

#include "nmfuse/conformal.hpp"
#include "nmfuse/pipeline.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace nmfuse {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Provenance recorded in every emitted file.
struct Provenance {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

std::string hex64(std::uint64_t value);

std::string serialize_model(const FittedModel& model, const Provenance& prov);
FittedModel parse_model(std::string_view text);

struct CalibrationRecord {
  FittedModel model;
  CombinerSettings combiner;
  ConformalCalibration calibration;
  std::uint64_t validation_digest = 0;
};

std::string serialize_calibration(const CalibrationRecord& record, const Provenance& prov);
CalibrationRecord parse_calibration(std::string_view text);

}  // namespace nmfuse
