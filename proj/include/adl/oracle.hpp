// SPDX-License-Identifier: Apache-2.0
//
// Reference trainers that pin down what the pipeline must compute.
//
// sync_ga_sgd runs ordinary gradient accumulation on the whole network.
// delayed_replay keeps every parameter version and, for each module and slot,
// evaluates the full-network gradient of the delayed batch on the version it
// was forwarded with. Both share the pipeline's layer kernels, accumulator
// and update so that equal semantics imply bit-equal traces.
#pragma once

#include <cstdint>
#include <map>

#include "adl/data.hpp"
#include "adl/scheduler.hpp"
#include "adl/trace.hpp"

namespace adl {

/// Full-network snapshots keyed by update index; 0 is the initialisation.
using ParamHistory = std::map<std::int64_t, ParamSet>;

/// Plain GA-SGD: M forward/backward passes on the same parameters, one
/// averaged update. The partition is ignored; the trace has K = 1.
RunTrace sync_ga_sgd(const TrainConfig& config, const Dataset& data);

/// Replays the delayed-gradient recursion from a parameter history. The
/// trace carries the nominal pipeline ticks so it compares against
/// run_clocked field for field.
RunTrace delayed_replay(const TrainConfig& config, const Dataset& data);

/// Loss and gradient over the whole dataset in one batch.
struct FullBatch {
  double loss = 0.0;
  ParamSet grads;
  double grad_norm = 0.0;
};

FullBatch evaluate_full_batch(std::span<const LayerSpec> layers, LossKind loss,
                              const ParamSet& params, const Dataset& data);

/// Fraction of rows whose arg-max output matches the label.
double classification_accuracy(std::span<const LayerSpec> layers,
                               const ParamSet& params, const Dataset& data);

struct CompareReport {
  bool pass = true;
  std::optional<std::int64_t> first_divergence;  // update index s
  double max_loss_diff = 0.0;
  double max_grad_norm_diff = 0.0;
  double max_param_diff = 0.0;
  std::string detail;
};

/// Per-update comparison of two traces. Integer provenance must match
/// exactly; loss, gradient norm and (when both present) final parameters
/// must agree within tol. Throws Comparison on range mismatch.
CompareReport compare_traces(const RunTrace& a, const RunTrace& b, double tol);


}  // namespace adl
