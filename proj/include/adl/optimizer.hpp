// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "adl/net.hpp"
#include "adl/staleness.hpp"

namespace adl {

/// Where one accumulated gradient came from.
struct SlotRecord {
  std::int64_t batch_index = 0;
  std::int64_t version = 0;
  bool skipped = false;

  bool operator==(const SlotRecord&) const = default;
};

/// Running sum of M per-batch gradients for one module.
class Accumulator {
 public:
  Accumulator() = default;
  Accumulator(const ParamSet& like, std::int64_t capacity);

  /// grad_sum += grad. Throws Protocol once M slots are filled.
  void accumulate(const ParamSet& grad, std::int64_t batch_index,
                  std::int64_t version);
  /// Records a pipeline-fill slot that contributes zero.
  void skip(std::int64_t batch_index, std::int64_t version);

  bool full() const noexcept {
    return static_cast<std::int64_t>(provenance_.size()) == capacity_;
  }
  std::int64_t capacity() const noexcept { return capacity_; }
  std::int64_t count_real() const noexcept { return count_real_; }
  const ParamSet& grad_sum() const noexcept { return grad_sum_; }
  const std::vector<SlotRecord>& provenance() const noexcept {
    return provenance_;
  }

  void reset();

 private:
  void claim_slot();

  ParamSet grad_sum_;
  std::int64_t capacity_ = 1;
  std::int64_t count_real_ = 0;
  std::vector<SlotRecord> provenance_;
};

struct SgdConfig {
  double momentum = 0.0;      // in [0, 1)
  double weight_decay = 0.0;  // >= 0, coupled (added to the gradient)
};

void validate(const SgdConfig& sgd);

struct UpdateResult {
  /// Squared norm of the averaged gradient sum/M, accumulated layer by layer.
  double grad_sq_norm = 0.0;
  /// False when the new parameters or the gradient contain NaN/Inf.
  bool finite = true;
};

/// g = sum/M (+ lambda*theta); v = mu*v + g; theta -= lr*v; then resets acc.
/// `velocity` is sized lazily on first use. Throws Protocol unless acc is full.
UpdateResult ga_update(ParamSet& params, Accumulator& acc, double lr,
                       const SgdConfig& sgd, ParamSet& velocity);

struct StepDecay {
  double base = 0.1;
  std::vector<double> milestones;  // in epochs, ascending
  double factor = 0.1;
  std::int64_t warmup_updates = 0;
};

struct Harmonic {
  double c = 1.0;
};

struct ConstantLr {
  double gamma = 0.1;
};

using LrSchedule = std::variant<StepDecay, Harmonic, ConstantLr>;

/// Step decay ramps linearly from base/W to base over the first W updates,
/// then multiplies by factor for each milestone reached. Harmonic is c/(s+1).
double lr_at(const LrSchedule& schedule, std::int64_t s, double epochs_elapsed);

/// 0.1 * b * M / 256.
double scaled_base_lr(std::int64_t batch_size, std::int64_t accumulation_steps);

/// Updates spanned by `epochs` epochs when each update consumes M batches.
std::int64_t warmup_updates(double epochs, std::int64_t batches_per_epoch,
                            std::int64_t accumulation_steps);

/// Constant rate from the constant-rate convergence result. Throws Domain if
/// L * gamma > 1.
ConstantLr constant_from_bound(const BoundInputs& inputs);

}  // namespace adl
