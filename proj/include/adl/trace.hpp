// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adl/net.hpp"
#include "adl/optimizer.hpp"
#include "adl/staleness.hpp"

namespace adl {

/// Loss or gradient norm above this (or non-finite) marks a run as diverged.
inline constexpr double kDivergenceThreshold = 1e12;

/// One module's part of update s -> s+1.
struct ModuleUpdate {
  std::int64_t tick = 0;
  std::vector<SlotRecord> slots;        // j = 0..M-1
  std::vector<std::int64_t> staleness;  // observed d_{k,j}, one per slot
  double grad_sq_norm = 0.0;            // of the averaged gradient; not in CSV

  bool operator==(const ModuleUpdate&) const = default;
};

struct UpdateRecord {
  std::int64_t s = 0;
  double loss = 0.0;       // mean loss of batches U_s..U_s+M-1 at version s
  double grad_norm = 0.0;  // norm of the concatenated averaged gradient
  std::vector<ModuleUpdate> modules;

  bool operator==(const UpdateRecord&) const = default;
};

struct TickEvent {
  std::int64_t tick = 0;
  std::int64_t module = 0;
  std::optional<std::int64_t> forward_batch;
  std::optional<std::int64_t> backward_batch;  // negative during fill
  std::optional<std::int64_t> update;          // s of an update that fired

  bool operator==(const TickEvent&) const = default;
};

struct RunTrace {
  std::int64_t K = 1;
  std::int64_t M = 1;
  std::vector<UpdateRecord> updates;
  bool diverged = false;
  ParamSet final_params;         // empty when unknown (parsed traces)
  std::vector<TickEvent> ticks;  // only when tick tracing is on
  double wall_seconds = 0.0;
};

/// Builds per-update records from out-of-order module reports and flags the
/// first diverged update. Shared by the pipeline and the oracles so every
/// execution path aggregates identically.
class TraceBuilder {
 public:
  TraceBuilder(std::int64_t K, std::int64_t M);

  void add_loss(std::int64_t s, double loss);
  void add_module_update(std::int64_t s, std::int64_t k, ModuleUpdate update,
                         bool finite);

  /// Finalises every complete record in order. Returns false once the
  /// run has diverged.
  bool flush();
  bool diverged() const noexcept { return diverged_; }
  std::int64_t finalized() const noexcept {
    return static_cast<std::int64_t>(done_.size());
  }

  RunTrace take();

 private:
  struct Pending {
    double loss_sum = 0.0;
    std::int64_t losses = 0;
    std::vector<std::optional<ModuleUpdate>> modules;
    bool finite = true;
  };
  Pending& pending(std::int64_t s);

  std::int64_t K_;
  std::int64_t M_;
  std::vector<Pending> pending_;
  std::vector<UpdateRecord> done_;
  bool diverged_ = false;
};

inline constexpr const char* kTraceCsvHeader =
    "s,tick,loss,grad_norm,module,j,batch_index,version_used,d_kj";

/// One row per (update, module, slot); doubles with 17 significant digits.
void write_trace_csv(std::ostream& os, const RunTrace& trace);
void write_trace_csv(const std::string& path, const RunTrace& trace);

/// Inverse of write_trace_csv. Throws Parse on malformed input.
RunTrace read_trace_csv(std::istream& is);
RunTrace read_trace_csv(const std::string& path);

void write_ticks_csv(std::ostream& os, const RunTrace& trace);

/// Observed averaged staleness of module k over updates whose slots are
/// all past pipeline fill. Empty when no such update exists.
std::optional<Rational> observed_averaged_los(const RunTrace& trace,
                                              std::int64_t k);

std::string format_double(double v);

}  // namespace adl
