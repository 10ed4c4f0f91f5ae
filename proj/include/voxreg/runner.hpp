#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>

#include "voxreg/evaluation.hpp"
#include "voxreg/method.hpp"

namespace vxr {

// Declarative run configuration: one JSON document drives every subcommand.
// `seed` is mandatory; every output is a pure function of (config, seed).
struct RunConfig {
  nlohmann::json raw;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string output;
  bool binary_output = false;

  static RunConfig parse(const std::string& json_text);

  MethodSpec method() const;
  std::optional<SmoothingTune> smoothing_tune() const;        // grids, for evaluate
  std::optional<SmoothingSpec> smoothing_fixed(int voxels) const;  // fixed spec, for smooth
};

// 64-bit FNV-1a of the canonical config dump, recorded in run manifests.
std::uint64_t config_hash(const nlohmann::json& config);

// Fit artifacts: coefficients/std_errors/noise_variance/regularization tables
// plus a run manifest. All writes go through temp-file + rename.
void cmd_fit(const RunConfig& config);

// Evaluation report: report.json + map.csv keyed by voxel coordinates.
void cmd_evaluate(const RunConfig& config);

// Applies a fixed smoothing spec to a stored coefficient field.
void cmd_smooth(const RunConfig& config);

// Simulation experiments (misassignment study or marginal-prior check).
void cmd_simulate(const RunConfig& config);

// Sampler validation harness; returns true when every check passes.
bool cmd_check(const RunConfig& config);

// Shared helpers for fit artifacts (also used by cmd_smooth and tests).
void write_field_artifacts(const std::string& dir, const CoefficientField& field,
                           const RegularizationMap& map, bool binary);
CoefficientField read_field_artifacts(const std::string& dir);

}  // namespace vxr
