// SPDX-License-Identifier: Apache-2.0
#include "adl/optimizer.hpp"

#include <cmath>
#include <string>

#include "adl/error.hpp"

namespace adl {

Accumulator::Accumulator(const ParamSet& like, std::int64_t capacity)
    : capacity_(capacity) {
  if (capacity < 1) fail(ErrorKind::Config, "accumulation steps M must be >= 1");
  grad_sum_.reserve(like.size());
  for (const Tensor& t : like) grad_sum_.emplace_back(t.shape());
  provenance_.reserve(static_cast<std::size_t>(capacity));
}

void Accumulator::claim_slot() {
  if (full()) {
    fail(ErrorKind::Protocol, "accumulator already holds M=" +
                                  std::to_string(capacity_) + " gradients");
  }
}

void Accumulator::accumulate(const ParamSet& grad, std::int64_t batch_index,
                             std::int64_t version) {
  claim_slot();
  if (grad.size() != grad_sum_.size()) {
    fail(ErrorKind::Dimension, "gradient layer count mismatch");
  }
  for (std::size_t l = 0; l < grad.size(); ++l) {
    if (grad[l].size() != grad_sum_[l].size()) {
      fail(ErrorKind::Dimension, "gradient shape mismatch in layer " +
                                     std::to_string(l));
    }
    for (std::size_t i = 0; i < grad[l].size(); ++i) grad_sum_[l][i] += grad[l][i];
  }
  ++count_real_;
  provenance_.push_back({batch_index, version, false});
}

void Accumulator::skip(std::int64_t batch_index, std::int64_t version) {
  claim_slot();
  provenance_.push_back({batch_index, version, true});
}

void Accumulator::reset() {
  for (Tensor& t : grad_sum_) t.fill(0.0);
  count_real_ = 0;
  provenance_.clear();
}

void validate(const SgdConfig& sgd) {
  if (!(sgd.momentum >= 0.0 && sgd.momentum < 1.0)) {
    fail(ErrorKind::Config, "momentum must lie in [0, 1)");
  }
  if (!(sgd.weight_decay >= 0.0)) {
    fail(ErrorKind::Config, "weight decay must be >= 0");
  }
}

UpdateResult ga_update(ParamSet& params, Accumulator& acc, double lr,
                       const SgdConfig& sgd, ParamSet& velocity) {
  if (!acc.full()) {
    fail(ErrorKind::Protocol, "update before M gradients were accumulated");
  }
  const ParamSet& sum = acc.grad_sum();
  if (sum.size() != params.size()) {
    fail(ErrorKind::Dimension, "accumulator does not match parameters");
  }
  if (velocity.empty()) {
    for (const Tensor& t : params) velocity.emplace_back(t.shape());
  }
  const double inv_m = 1.0 / static_cast<double>(acc.capacity());
  UpdateResult result;
  for (std::size_t l = 0; l < params.size(); ++l) {
    Tensor& theta = params[l];
    Tensor& v = velocity[l];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double avg = sum[l][i] * inv_m;
      result.grad_sq_norm += avg * avg;
      const double g = avg + sgd.weight_decay * theta[i];
      v[i] = sgd.momentum * v[i] + g;
      theta[i] -= lr * v[i];
    }
    result.finite = result.finite && theta.all_finite();
  }
  result.finite = result.finite && std::isfinite(result.grad_sq_norm);
  acc.reset();
  return result;
}

double lr_at(const LrSchedule& schedule, std::int64_t s, double epochs_elapsed) {
  if (s < 0) fail(ErrorKind::Domain, "update index must be >= 0");
  if (const auto* step = std::get_if<StepDecay>(&schedule)) {
    if (s < step->warmup_updates) {
      return step->base * static_cast<double>(s + 1) /
             static_cast<double>(step->warmup_updates);
    }
    double lr = step->base;
    for (double m : step->milestones) {
      if (epochs_elapsed >= m) lr *= step->factor;
    }
    return lr;
  }
  if (const auto* h = std::get_if<Harmonic>(&schedule)) {
    return h->c / static_cast<double>(s + 1);
  }
  return std::get<ConstantLr>(schedule).gamma;
}

double scaled_base_lr(std::int64_t batch_size, std::int64_t accumulation_steps) {
  return 0.1 * static_cast<double>(batch_size * accumulation_steps) / 256.0;
}

std::int64_t warmup_updates(double epochs, std::int64_t batches_per_epoch,
                            std::int64_t accumulation_steps) {
  if (epochs <= 0.0) return 0;
  return static_cast<std::int64_t>(
      std::ceil(epochs * static_cast<double>(batches_per_epoch) /
                static_cast<double>(accumulation_steps)));
}

ConstantLr constant_from_bound(const BoundInputs& inputs) {
  const ConstantRate rate = theorem3_lr(inputs);
  if (!rate.admissible) {
    fail(ErrorKind::Domain, "constant rate " + std::to_string(rate.gamma) +
                                " violates L * gamma <= 1; lower epsilon");
  }
  return {rate.gamma};
}

}  // namespace adl
