// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration files and the runner behind `adl run`.
//
// The format is flat `key = value` lines grouped under `[section]` headers;
// `#` starts a comment. Every key is validated before any compute starts and
// unknown keys are rejected. See configs/README.md for the schema.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "adl/data.hpp"
#include "adl/scheduler.hpp"
#include "adl/trace.hpp"

namespace adl {

enum class RunMode { AdlClocked, AdlParallel, SyncGa, DelayedReplay };
enum class TraceLevel { Updates, Ticks };

const char* to_string(RunMode mode) noexcept;

struct DatasetSpec {
  std::string id;  // "linreg" or "two-spirals"
  std::size_t n = 1000;
  std::size_t dim = 2;
  std::size_t out_dim = 1;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  TrainConfig train;
  DatasetSpec dataset;
  RunMode mode = RunMode::AdlClocked;
  std::string out_path;
  TraceLevel trace_level = TraceLevel::Updates;
  bool theory_preset = false;
};

/// Throws Config (bad or missing keys/values) or Parse (malformed lines).
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Parses a layer list such as "affine:2:16, tanh:16, affine:16:2".
std::vector<LayerSpec> parse_layers(std::string_view text);

Dataset make_dataset(const DatasetSpec& spec);

/// Runs the configured mode. Divergence is reported through trace.diverged.
RunTrace run_experiment(const ExperimentConfig& config, const Dataset& data);

/// `key = value` summary: final loss and gradient norm, update count,
/// divergence flag, wall time and per-module observed vs predicted
/// averaged staleness.
std::string summary_text(const ExperimentConfig& config, const RunTrace& trace);

/// Writes trace.csv and summary.txt (plus ticks.csv at tick level) into dir,
/// creating it if needed.
void write_outputs(const ExperimentConfig& config, const RunTrace& trace,
                   const std::string& dir);

}  // namespace adl
