// SPDX-License-Identifier: Apache-2.0
//
// Tick-accurate pipeline of K module workers.
//
// At tick tau, module k forwards batch w = tau - (k-1) and backpropagates
// batch w - 2(K-k) using the gradient module k+1 produced at tau-1. The
// backward fills slot j = w mod M of update s = w / M; once slot M-1 is
// filled the module applies the averaged update. Within a tick the order
// is forward, backward, update, which makes every forward of batch b run
// on parameter version floor(b/M).
#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "adl/data.hpp"
#include "adl/net.hpp"
#include "adl/optimizer.hpp"
#include "adl/partition.hpp"
#include "adl/trace.hpp"

namespace adl {

enum class ExecutionMode { Clocked, Parallel };

struct TrainConfig {
  std::vector<LayerSpec> layers;
  Partition partition;
  LossKind loss = LossKind::MeanSquaredError;
  std::int64_t M = 1;
  std::size_t batch_size = 32;
  std::int64_t updates = 1;  // S
  LrSchedule schedule = ConstantLr{0.1};
  SgdConfig sgd;
  std::uint64_t init_seed = 0;
  std::uint64_t sampler_seed = 0;
  ExecutionMode mode = ExecutionMode::Clocked;
  bool trace_ticks = false;
  /// Parallel mode gives up on a blocked queue after this many milliseconds.
  std::int64_t queue_timeout_ms = 60000;

  std::int64_t K() const noexcept {
    return static_cast<std::int64_t>(partition.modules());
  }
};

/// Throws Config/Dimension on an inconsistent configuration or dataset.
void validate(const TrainConfig& config, const Dataset& data);

/// Learning rate for update s (epochs counted as s*M / ceil(n/b)).
double lr_for_update(const TrainConfig& config, const Dataset& data,
                     std::int64_t s);

struct SchedulePosition {
  std::int64_t forward_tick = 0;
  std::int64_t backward_tick = 0;
};

/// forward_tick = b + k - 1, backward_tick = b + 2K - k - 1.
SchedulePosition schedule_position(std::int64_t batch, std::int64_t k,
                                   std::int64_t K);

struct ActivationMsg {
  std::int64_t batch_index = 0;
  Tensor activation;
};

struct GradientMsg {
  std::int64_t batch_index = 0;
  Tensor grad;
};

/// Stashed state of an in-flight batch.
struct ForwardContext {
  std::int64_t batch_index = 0;
  Tensor input;
  std::vector<Tensor> intermediates;
  std::int64_t param_version = 0;
  std::shared_ptr<const ParamSet> params;  // values the forward ran with
  Tensor upstream;  // loss gradient, top module only
};

struct Inbox {
  std::optional<ActivationMsg> activation;
  std::optional<GradientMsg> gradient;
};

struct TickOutput {
  std::optional<ActivationMsg> activation;  // to module k+1
  std::optional<GradientMsg> gradient;      // to module k-1
  std::optional<double> loss;               // top module: loss of forward batch
  std::optional<ModuleUpdate> update;       // when an update fired
  bool update_finite = true;
  TickEvent event;
};

/// One pipeline stage. Owns its layers' parameters, stash, accumulator and
/// momentum buffer; exchanges only immutable messages with its neighbours.
class ModuleWorker {
 public:
  ModuleWorker(const TrainConfig& config, const Dataset& data, std::int64_t k,
               ParamSet initial);

  std::int64_t k() const noexcept { return k_; }
  std::int64_t version() const noexcept { return version_; }
  const ParamSet& params() const noexcept { return *params_; }
  std::size_t stash_size() const noexcept { return stash_.size(); }
  std::size_t max_stash_size() const noexcept { return max_stash_; }

  /// Ticks on which this module has work: [k-1, M*S + k - 2].
  std::int64_t first_tick() const noexcept { return k_ - 1; }
  std::int64_t last_tick() const noexcept;

  /// Whether the module expects an activation / gradient message at tick tau.
  bool needs_activation(std::int64_t tau) const;
  bool needs_gradient(std::int64_t tau) const;

  /// Runs forward, backward and (at a group boundary) the update for tick
  /// tau. Throws Protocol if the inbox does not hold exactly the messages
  /// the schedule calls for.
  TickOutput tick(std::int64_t tau, Inbox inbox);

 private:
  std::int64_t delay() const noexcept { return 2 * (K_ - k_); }

  const TrainConfig& config_;
  const Dataset& data_;
  std::int64_t k_;
  std::int64_t K_;
  std::int64_t M_;
  std::int64_t total_batches_;
  std::vector<LayerSpec> layers_;
  std::shared_ptr<const ParamSet> params_;
  std::deque<ForwardContext> stash_;
  std::size_t max_stash_ = 0;
  Accumulator acc_;
  ParamSet velocity_;
  std::int64_t version_ = 0;
};

/// Single-threaded global clock; deterministic. Divergence ends the run with
/// a partial trace flagged `diverged`.
RunTrace run_clocked(const TrainConfig& config, const Dataset& data);

/// One thread per module connected by bounded FIFO queues. Produces the
/// same trace as run_clocked, bit for bit.
RunTrace run_parallel(const TrainConfig& config, const Dataset& data);

/// Dispatches on config.mode.
RunTrace run_pipeline(const TrainConfig& config, const Dataset& data);

/// Per-module slices of a full-network parameter set, in module order.
std::vector<ParamSet> split_params(const Partition& partition,
                                   const ParamSet& full);

}  // namespace adl
