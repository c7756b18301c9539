// SPDX-License-Identifier: Apache-2.0
#include "adl/scheduler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "adl/channel.hpp"
#include "adl/error.hpp"
#include "adl/staleness.hpp"

namespace adl {
namespace {

void protocol(const std::string& what, std::int64_t k, std::int64_t tau) {
  fail(ErrorKind::Protocol, "module " + std::to_string(k) + ", tick " +
                                std::to_string(tau) + ": " + what);
}

void validate_schedule(const LrSchedule& schedule) {
  if (const auto* step = std::get_if<StepDecay>(&schedule)) {
    if (!(step->base > 0.0)) fail(ErrorKind::Config, "base learning rate must be > 0");
    if (!(step->factor > 0.0 && step->factor <= 1.0)) {
      fail(ErrorKind::Config, "decay factor must lie in (0, 1]");
    }
    if (step->warmup_updates < 0) fail(ErrorKind::Config, "negative warm-up");
    if (!std::is_sorted(step->milestones.begin(), step->milestones.end())) {
      fail(ErrorKind::Config, "milestones must be ascending");
    }
  } else if (const auto* h = std::get_if<Harmonic>(&schedule)) {
    if (!(h->c > 0.0)) fail(ErrorKind::Config, "harmonic c must be > 0");
  } else if (!(std::get<ConstantLr>(schedule).gamma > 0.0)) {
    fail(ErrorKind::Config, "learning rate must be > 0");
  }
}

ParamSet concat(const std::vector<ParamSet>& parts) {
  ParamSet full;
  for (const ParamSet& p : parts) full.insert(full.end(), p.begin(), p.end());
  return full;
}

}  // namespace

void validate(const TrainConfig& config, const Dataset& data) {
  validate_chain(config.layers);
  if (config.partition.layers() != config.layers.size()) {
    fail(ErrorKind::Config, "partition covers " +
                                std::to_string(config.partition.layers()) +
                                " layers but the network has " +
                                std::to_string(config.layers.size()));
  }
  if (config.M < 1) fail(ErrorKind::Config, "M must be >= 1");
  if (config.batch_size < 1) fail(ErrorKind::Config, "batch size must be >= 1");
  if (config.updates < 1) fail(ErrorKind::Config, "updates S must be >= 1");
  validate(config.sgd);
  validate_schedule(config.schedule);
  if (data.size() < 1) fail(ErrorKind::Config, "dataset is empty");
  if (data.input_dim() != config.layers.front().in_dim) {
    fail(ErrorKind::Config, "dataset has " + std::to_string(data.input_dim()) +
                                " features, network expects " +
                                std::to_string(config.layers.front().in_dim));
  }
  const std::size_t out = config.layers.back().out_dim;
  if (config.loss == LossKind::SoftmaxCrossEntropy) {
    if (!data.classification || data.num_classes > out) {
      fail(ErrorKind::Config, "softmax-ce needs a classification dataset with "
                              "at most out_dim classes");
    }
  } else if (data.classification || data.targets.cols() != out) {
    fail(ErrorKind::Config, "mse needs regression targets with out_dim columns");
  }
}

double lr_for_update(const TrainConfig& config, const Dataset& data,
                     std::int64_t s) {
  const double epochs =
      static_cast<double>(s * config.M) /
      static_cast<double>(batches_per_epoch(data.size(), config.batch_size));
  return lr_at(config.schedule, s, epochs);
}

SchedulePosition schedule_position(std::int64_t batch, std::int64_t k,
                                   std::int64_t K) {
  if (batch < 0 || K < 1 || k < 1 || k > K) {
    fail(ErrorKind::Domain, "schedule position needs b >= 0 and 1 <= k <= K");
  }
  return {batch + k - 1, batch + 2 * K - k - 1};
}

std::vector<ParamSet> split_params(const Partition& partition,
                                   const ParamSet& full) {
  if (full.size() != partition.layers()) {
    fail(ErrorKind::Dimension, "parameter set does not match partition");
  }
  std::vector<ParamSet> parts;
  for (std::size_t k = 1; k <= partition.modules(); ++k) {
    parts.emplace_back(full.begin() + static_cast<std::ptrdiff_t>(partition.first_offset(k)),
                       full.begin() + static_cast<std::ptrdiff_t>(partition.end_offset(k)));
  }
  return parts;
}

ModuleWorker::ModuleWorker(const TrainConfig& config, const Dataset& data,
                           std::int64_t k, ParamSet initial)
    : config_(config),
      data_(data),
      k_(k),
      K_(config.K()),
      M_(config.M),
      total_batches_(config.M * config.updates),
      layers_(config.layers.begin() + static_cast<std::ptrdiff_t>(
                                          config.partition.first_offset(static_cast<std::size_t>(k))),
              config.layers.begin() + static_cast<std::ptrdiff_t>(
                                          config.partition.end_offset(static_cast<std::size_t>(k)))),
      params_(std::make_shared<const ParamSet>(std::move(initial))),
      acc_(*params_, config.M) {
  if (params_->size() != layers_.size()) {
    fail(ErrorKind::Dimension, "module parameters do not match its layers");
  }
}

std::int64_t ModuleWorker::last_tick() const noexcept {
  return total_batches_ - 1 + k_ - 1;
}

bool ModuleWorker::needs_activation(std::int64_t tau) const {
  const std::int64_t w = tau - (k_ - 1);
  return k_ > 1 && w >= 0 && w < total_batches_;
}

bool ModuleWorker::needs_gradient(std::int64_t tau) const {
  const std::int64_t w = tau - (k_ - 1);
  return k_ < K_ && w >= 0 && w < total_batches_ && w - delay() >= 0;
}

TickOutput ModuleWorker::tick(std::int64_t tau, Inbox inbox) {
  TickOutput out;
  out.event.tick = tau;
  out.event.module = k_;
  const std::int64_t w = tau - (k_ - 1);
  if (w < 0 || w >= total_batches_) {
    if (inbox.activation || inbox.gradient) {
      protocol("message arrived on an idle tick", k_, tau);
    }
    return out;
  }

  // Forward batch w on the live parameters.
  if (version_ != floor_div(w, M_)) {
    protocol("forward of batch " + std::to_string(w) + " on version " +
                 std::to_string(version_),
             k_, tau);
  }
  std::optional<Batch> batch;
  if (k_ == 1 || k_ == K_) {
    batch = batch_at(data_, config_.batch_size, config_.sampler_seed, w);
  }
  Tensor input;
  if (k_ == 1) {
    if (inbox.activation) protocol("unexpected activation", k_, tau);
    input = batch->inputs;
  } else {
    if (!inbox.activation || inbox.activation->batch_index != w) {
      protocol("missing activation for batch " + std::to_string(w), k_, tau);
    }
    input = std::move(inbox.activation->activation);
  }
  RangeForward fwd = forward_range(layers_, *params_, input);
  ForwardContext ctx{w, std::move(input), std::move(fwd.intermediates),
                     version_, params_, Tensor()};
  if (k_ == K_) {
    LossResult lr = loss_forward(config_.loss, fwd.output, batch->targets);
    out.loss = lr.value;
    ctx.upstream = std::move(lr.grad);
  } else {
    out.activation = ActivationMsg{w, std::move(fwd.output)};
  }
  stash_.push_back(std::move(ctx));
  max_stash_ = std::max(max_stash_, stash_.size());
  if (static_cast<std::int64_t>(stash_.size()) > delay() + 1) {
    protocol("stash exceeds 2(K-k)+1 entries", k_, tau);
  }
  out.event.forward_batch = w;

  // Backward of batch w - 2(K-k) into slot j of update s.
  const std::int64_t s = w / M_;
  const std::int64_t back = w - delay();
  out.event.backward_batch = back;
  if (back >= 0) {
    ForwardContext& stored = stash_.front();
    if (stored.batch_index != back) {
      protocol("stash head is batch " + std::to_string(stored.batch_index) +
                   ", expected " + std::to_string(back),
               k_, tau);
    }
    Tensor upstream;
    if (k_ == K_) {
      if (inbox.gradient) protocol("unexpected gradient", k_, tau);
      upstream = std::move(stored.upstream);
    } else {
      if (!inbox.gradient || inbox.gradient->batch_index != back) {
        protocol("missing gradient for batch " + std::to_string(back), k_, tau);
      }
      upstream = std::move(inbox.gradient->grad);
    }
    RangeBackward bwd =
        backward_range(layers_, *stored.params, stored.intermediates, upstream);
    acc_.accumulate(bwd.param_grads, back, stored.param_version);
    if (k_ > 1 && w + 2 < total_batches_) {
      out.gradient = GradientMsg{back, std::move(bwd.input_grad)};
    }
    stash_.pop_front();
  } else {
    if (inbox.gradient) protocol("gradient arrived during pipeline fill", k_, tau);
    acc_.skip(back, 0);
  }

  if (w % M_ == M_ - 1) {
    ModuleUpdate mu;
    mu.tick = tau;
    mu.slots = acc_.provenance();
    for (const SlotRecord& r : mu.slots) {
      mu.staleness.push_back(s - floor_div(r.batch_index, M_));
    }
    auto next = std::make_shared<ParamSet>(*params_);
    const UpdateResult r = ga_update(*next, acc_, lr_for_update(config_, data_, s),
                                     config_.sgd, velocity_);
    mu.grad_sq_norm = r.grad_sq_norm;
    params_ = std::move(next);
    ++version_;
    out.update = std::move(mu);
    out.update_finite = r.finite;
    out.event.update = s;
  }
  return out;
}

namespace {

struct Pipeline {
  std::vector<std::unique_ptr<ModuleWorker>> workers;
  TraceBuilder builder;

  Pipeline(const TrainConfig& config, const Dataset& data)
      : builder(config.K(), config.M) {
    validate(config, data);
    const ParamSet full = init_params(config.layers, config.init_seed);
    std::vector<ParamSet> parts = split_params(config.partition, full);
    for (std::int64_t k = 1; k <= config.K(); ++k) {
      workers.push_back(std::make_unique<ModuleWorker>(
          config, data, k, std::move(parts[static_cast<std::size_t>(k - 1)])));
    }
  }

  // Returns false once the trace has diverged.
  bool record(const TrainConfig& config, std::int64_t k, std::int64_t tau,
              TickOutput& out) {
    if (out.loss) {
      const std::int64_t w = tau - (k - 1);
      builder.add_loss(w / config.M, *out.loss);
    }
    if (out.update) {
      const std::int64_t s = *out.event.update;
      builder.add_module_update(s, k, std::move(*out.update), out.update_finite);
    }
    return builder.flush();
  }

  RunTrace finish(const TrainConfig& config,
                  std::chrono::steady_clock::time_point started) {
    RunTrace trace = builder.take();
    if (!trace.diverged) {
      std::vector<ParamSet> parts;
      for (const auto& w : workers) {
        if (w->version() != config.updates) {
          fail(ErrorKind::Protocol, "module " + std::to_string(w->k()) +
                                        " finished with " +
                                        std::to_string(w->version()) +
                                        " updates");
        }
        parts.push_back(w->params());
      }
      trace.final_params = concat(parts);
    }
    trace.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    return trace;
  }
};

}  // namespace

RunTrace run_clocked(const TrainConfig& config, const Dataset& data) {
  const auto started = std::chrono::steady_clock::now();
  Pipeline pipe(config, data);
  const std::int64_t K = config.K();
  // Slot k holds the message addressed to module k (1-based).
  std::vector<std::optional<ActivationMsg>> acts(static_cast<std::size_t>(K + 2));
  std::vector<std::optional<GradientMsg>> grads(static_cast<std::size_t>(K + 2));
  std::vector<TickEvent> events;
  const std::int64_t last = config.M * config.updates - 1 + 2 * (K - 1);
  bool running = true;
  for (std::int64_t tau = 0; tau <= last && running; ++tau) {
    std::vector<std::optional<ActivationMsg>> next_acts(acts.size());
    std::vector<std::optional<GradientMsg>> next_grads(grads.size());
    for (std::int64_t k = 1; k <= K; ++k) {
      const auto slot = static_cast<std::size_t>(k);
      Inbox inbox{std::exchange(acts[slot], std::nullopt),
                  std::exchange(grads[slot], std::nullopt)};
      TickOutput out = pipe.workers[slot - 1]->tick(tau, std::move(inbox));
      if (out.activation) next_acts[slot + 1] = std::move(out.activation);
      if (out.gradient) next_grads[slot - 1] = std::move(out.gradient);
      if (config.trace_ticks && (out.event.forward_batch || out.event.update)) {
        events.push_back(out.event);
      }
      if (!pipe.record(config, k, tau, out)) running = false;
    }
    acts = std::move(next_acts);
    grads = std::move(next_grads);
  }
  RunTrace trace = pipe.finish(config, started);
  trace.ticks = std::move(events);
  return trace;
}

RunTrace run_parallel(const TrainConfig& config, const Dataset& data) {
  const auto started = std::chrono::steady_clock::now();
  Pipeline pipe(config, data);
  const std::int64_t K = config.K();
  const std::size_t capacity = static_cast<std::size_t>(2 * K);
  const std::chrono::milliseconds timeout(config.queue_timeout_ms);

  // act_q[k]: into module k from k-1. grad_q[k]: into module k from k+1.
  std::vector<std::unique_ptr<BoundedQueue<ActivationMsg>>> act_q(
      static_cast<std::size_t>(K + 1));
  std::vector<std::unique_ptr<BoundedQueue<GradientMsg>>> grad_q(
      static_cast<std::size_t>(K + 1));
  for (std::int64_t k = 1; k <= K; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (k > 1) act_q[i] = std::make_unique<BoundedQueue<ActivationMsg>>(capacity, timeout);
    if (k < K) grad_q[i] = std::make_unique<BoundedQueue<GradientMsg>>(capacity, timeout);
  }

  std::mutex collector;
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::vector<TickEvent> events;

  auto shutdown = [&] {
    stop = true;
    for (auto& q : act_q) if (q) q->close();
    for (auto& q : grad_q) if (q) q->close();
  };

  auto work = [&](std::int64_t k) {
    ModuleWorker& worker = *pipe.workers[static_cast<std::size_t>(k - 1)];
    const auto i = static_cast<std::size_t>(k);
    try {
      for (std::int64_t tau = worker.first_tick(); tau <= worker.last_tick(); ++tau) {
        if (stop) return;
        Inbox inbox;
        if (worker.needs_activation(tau)) {
          inbox.activation = act_q[i]->pop();
          if (!inbox.activation) return;
        }
        if (worker.needs_gradient(tau)) {
          inbox.gradient = grad_q[i]->pop();
          if (!inbox.gradient) return;
        }
        TickOutput out = worker.tick(tau, std::move(inbox));
        if (out.activation && !act_q[i + 1]->push(std::move(*out.activation))) return;
        if (out.gradient && !grad_q[i - 1]->push(std::move(*out.gradient))) return;
        if (out.loss || out.update || config.trace_ticks) {
          std::lock_guard lock(collector);
          if (config.trace_ticks) events.push_back(out.event);
          if (!pipe.record(config, k, tau, out)) {
            shutdown();
            return;
          }
        }
      }
    } catch (...) {
      std::lock_guard lock(collector);
      if (!error) error = std::current_exception();
      shutdown();
    }
  };

  if (K == 1) {
    work(1);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(K));
    for (std::int64_t k = 1; k <= K; ++k) threads.emplace_back(work, k);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  RunTrace trace = pipe.finish(config, started);
  std::sort(events.begin(), events.end(), [](const TickEvent& a, const TickEvent& b) {
    return a.tick != b.tick ? a.tick < b.tick : a.module < b.module;
  });
  trace.ticks = std::move(events);
  return trace;
}

RunTrace run_pipeline(const TrainConfig& config, const Dataset& data) {
  return config.mode == ExecutionMode::Parallel ? run_parallel(config, data)
                                                : run_clocked(config, data);
}

}  // namespace adl
