// SPDX-License-Identifier: Apache-2.0
#include "adl/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "adl/error.hpp"
#include "adl/staleness.hpp"

namespace adl {
namespace {

struct BatchResult {
  double loss = 0.0;
  ParamSet grads;
};

// Full-network forward, loss and backward of batch t on `params`.
BatchResult full_gradient(const TrainConfig& config, const Dataset& data,
                          const ParamSet& params, std::int64_t t) {
  const Batch batch = batch_at(data, config.batch_size, config.sampler_seed, t);
  RangeForward fwd = forward_range(config.layers, params, batch.inputs);
  LossResult lr = loss_forward(config.loss, fwd.output, batch.targets);
  RangeBackward bwd =
      backward_range(config.layers, params, fwd.intermediates, lr.grad);
  return {lr.value, std::move(bwd.param_grads)};
}

ParamSet slice(const ParamSet& full, std::size_t first, std::size_t last) {
  return ParamSet(full.begin() + static_cast<std::ptrdiff_t>(first),
                  full.begin() + static_cast<std::ptrdiff_t>(last));
}

ModuleUpdate apply_update(const TrainConfig& config, const Dataset& data,
                          std::int64_t s, std::int64_t tick, ParamSet& params,
                          Accumulator& acc, ParamSet& velocity, bool& finite) {
  ModuleUpdate mu;
  mu.tick = tick;
  mu.slots = acc.provenance();
  for (const SlotRecord& r : mu.slots) {
    mu.staleness.push_back(s - floor_div(r.batch_index, config.M));
  }
  const UpdateResult r = ga_update(params, acc, lr_for_update(config, data, s),
                                   config.sgd, velocity);
  mu.grad_sq_norm = r.grad_sq_norm;
  finite = r.finite;
  return mu;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

RunTrace sync_ga_sgd(const TrainConfig& config, const Dataset& data) {
  const auto started = std::chrono::steady_clock::now();
  validate(config, data);
  const std::int64_t M = config.M;
  ParamSet params = init_params(config.layers, config.init_seed);
  Accumulator acc(params, M);
  ParamSet velocity;
  TraceBuilder builder(1, M);
  for (std::int64_t s = 0; s < config.updates; ++s) {
    for (std::int64_t j = 0; j < M; ++j) {
      const std::int64_t t = M * s + j;
      BatchResult r = full_gradient(config, data, params, t);
      builder.add_loss(s, r.loss);
      acc.accumulate(r.grads, t, s);
    }
    bool finite = true;
    ModuleUpdate mu = apply_update(config, data, s, M * s + M - 1, params, acc,
                                   velocity, finite);
    builder.add_module_update(s, 1, std::move(mu), finite);
    if (!builder.flush()) break;
  }
  RunTrace trace = builder.take();
  if (!trace.diverged) trace.final_params = std::move(params);
  trace.wall_seconds = seconds_since(started);
  return trace;
}

RunTrace delayed_replay(const TrainConfig& config, const Dataset& data) {
  const auto started = std::chrono::steady_clock::now();
  validate(config, data);
  const std::int64_t K = config.K();
  const std::int64_t M = config.M;
  const Partition& part = config.partition;

  ParamHistory history;
  history.emplace(0, init_params(config.layers, config.init_seed));
  std::map<std::int64_t, BatchResult> cache;
  auto gradient_of = [&](std::int64_t t) -> const BatchResult& {
    auto it = cache.find(t);
    if (it == cache.end()) {
      const std::int64_t v = floor_div(t, M);
      it = cache.emplace(t, full_gradient(config, data, history.at(v), t)).first;
    }
    return it->second;
  };

  std::vector<Accumulator> accs;
  std::vector<ParamSet> velocities(static_cast<std::size_t>(K));
  for (std::int64_t k = 1; k <= K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    accs.emplace_back(slice(history.at(0), part.first_offset(uk), part.end_offset(uk)),
                      M);
  }

  TraceBuilder builder(K, M);
  for (std::int64_t s = 0; s < config.updates; ++s) {
    for (std::int64_t j = 0; j < M; ++j) builder.add_loss(s, gradient_of(M * s + j).loss);

    const ParamSet& current = history.at(s);
    ParamSet next;
    for (std::int64_t k = 1; k <= K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const std::size_t first = part.first_offset(uk);
      const std::size_t last = part.end_offset(uk);
      Accumulator& acc = accs[uk - 1];
      for (std::int64_t j = 0; j < M; ++j) {
        const std::int64_t t = slot_batch_index(s, j, K, k, M);
        const std::int64_t v = effective_version(s, j, K, k, M);
        if (t < 0) {
          acc.skip(t, v);
          continue;
        }
        if (v != floor_div(t, M)) {
          fail(ErrorKind::Protocol, "replay version disagrees with staleness");
        }
        acc.accumulate(slice(gradient_of(t).grads, first, last), t, v);
      }
      ParamSet module = slice(current, first, last);
      bool finite = true;
      ModuleUpdate mu = apply_update(config, data, s, M * s + M - 1 + k - 1,
                                     module, acc, velocities[uk - 1], finite);
      builder.add_module_update(s, k, std::move(mu), finite);
      next.insert(next.end(), module.begin(), module.end());
    }
    history.emplace(s + 1, std::move(next));
    if (!builder.flush()) break;

    // Oldest batch any later slot can touch is M(s+1) - 2(K-1).
    const std::int64_t oldest = M * (s + 1) - 2 * (K - 1);
    cache.erase(cache.begin(), cache.lower_bound(oldest));
    history.erase(history.begin(),
                  history.lower_bound(std::max<std::int64_t>(0, floor_div(oldest, M))));
  }
  RunTrace trace = builder.take();
  if (!trace.diverged) trace.final_params = history.rbegin()->second;
  trace.wall_seconds = seconds_since(started);
  return trace;
}

FullBatch evaluate_full_batch(std::span<const LayerSpec> layers, LossKind loss,
                              const ParamSet& params, const Dataset& data) {
  const NetForward fwd = net_forward(layers, params, data.inputs, loss, data.targets);
  RangeBackward bwd = net_backward(layers, params, fwd);
  FullBatch out;
  out.loss = fwd.loss;
  double sq = 0.0;
  for (const Tensor& g : bwd.param_grads) sq += g.squared_norm();
  out.grad_norm = std::sqrt(sq);
  out.grads = std::move(bwd.param_grads);
  return out;
}

double classification_accuracy(std::span<const LayerSpec> layers,
                               const ParamSet& params, const Dataset& data) {
  if (!data.classification) fail(ErrorKind::Config, "dataset has no class labels");
  const Tensor out = forward_range(layers, params, data.inputs).output;
  const std::size_t classes = out.cols();
  std::size_t hits = 0;
  for (std::size_t n = 0; n < out.rows(); ++n) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (out[n * classes + c] > out[n * classes + best]) best = c;
    }
    if (static_cast<double>(best) == data.targets[n]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(out.rows());
}

CompareReport compare_traces(const RunTrace& a, const RunTrace& b, double tol) {
  if (a.K != b.K || a.M != b.M) {
    fail(ErrorKind::Comparison, "traces use different K or M");
  }
  if (a.updates.size() != b.updates.size()) {
    fail(ErrorKind::Comparison,
         "traces cover different update ranges (" +
             std::to_string(a.updates.size()) + " vs " +
             std::to_string(b.updates.size()) + ")");
  }
  CompareReport report;
  auto flag = [&](std::int64_t s, const std::string& why) {
    if (!report.first_divergence) {
      report.first_divergence = s;
      report.detail = "update " + std::to_string(s) + ": " + why;
    }
    report.pass = false;
  };
  for (std::size_t i = 0; i < a.updates.size(); ++i) {
    const UpdateRecord& ra = a.updates[i];
    const UpdateRecord& rb = b.updates[i];
    const double dl = std::fabs(ra.loss - rb.loss);
    const double dg = std::fabs(ra.grad_norm - rb.grad_norm);
    report.max_loss_diff = std::max(report.max_loss_diff, dl);
    report.max_grad_norm_diff = std::max(report.max_grad_norm_diff, dg);
    // NaN never compares <= tol, so a NaN on one side counts as a difference.
    const bool loss_ok = dl <= tol || (std::isnan(ra.loss) && std::isnan(rb.loss));
    const bool norm_ok =
        dg <= tol || (std::isnan(ra.grad_norm) && std::isnan(rb.grad_norm));
    if (!loss_ok) flag(ra.s, "loss differs by " + format_double(dl));
    if (!norm_ok) flag(ra.s, "gradient norm differs by " + format_double(dg));
    if (ra.modules.size() != rb.modules.size()) {
      flag(ra.s, "module count differs");
      continue;
    }
    for (std::size_t k = 0; k < ra.modules.size(); ++k) {
      const ModuleUpdate& ma = ra.modules[k];
      const ModuleUpdate& mb = rb.modules[k];
      if (ma.tick != mb.tick) {
        flag(ra.s, "module " + std::to_string(k + 1) + " tick differs");
      }
      if (ma.slots != mb.slots || ma.staleness != mb.staleness) {
        flag(ra.s, "module " + std::to_string(k + 1) + " provenance differs");
      }
    }
  }
  if (!a.final_params.empty() && !b.final_params.empty() && !a.diverged &&
      !b.diverged) {
    if (a.final_params.size() != b.final_params.size()) {
      fail(ErrorKind::Comparison, "final parameter layouts differ");
    }
    for (std::size_t l = 0; l < a.final_params.size(); ++l) {
      const Tensor& pa = a.final_params[l];
      const Tensor& pb = b.final_params[l];
      if (pa.size() != pb.size()) {
        fail(ErrorKind::Comparison, "final parameter layouts differ");
      }
      for (std::size_t i = 0; i < pa.size(); ++i) {
        report.max_param_diff =
            std::max(report.max_param_diff, std::fabs(pa[i] - pb[i]));
      }
    }
    if (!(report.max_param_diff <= tol)) {
      flag(static_cast<std::int64_t>(a.updates.size()),
           "final parameters differ by " + format_double(report.max_param_diff));
    }
  }
  return report;
}

}  // namespace adl
