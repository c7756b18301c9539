// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "adl/net.hpp"

namespace adl {

struct Dataset {
  Tensor inputs;   // [n x dim]
  Tensor targets;  // [n x out] for regression, [n] class labels otherwise
  bool classification = false;
  std::size_t num_classes = 0;
  std::string generator;
  std::uint64_t seed = 0;

  std::size_t size() const { return inputs.rows(); }
  std::size_t input_dim() const { return inputs.cols(); }
};

/// Inputs ~ N(0, 1); targets = W* x + noise, W* ~ N(0, 1/dim) from the seed.
Dataset gen_linreg(std::size_t n, std::size_t dim, double noise_std,
                   std::uint64_t seed, std::size_t out_dim = 1);

/// Two interleaved 2-D spirals, labels 0/1 with counts differing by <= 1.
Dataset gen_two_spirals(std::size_t n, double noise_std, std::uint64_t seed);

struct Batch {
  Tensor inputs;
  Tensor targets;
};

/// Sampler position: batch number `counter` of stream `seed`.
struct SamplerState {
  std::uint64_t seed = 0;
  std::int64_t counter = 0;
};

/// Indices of batch t: b i.i.d. uniform draws (with replacement) from a
/// counter-based generator, a pure function of (seed, t).
std::vector<std::size_t> batch_indices(std::size_t n, std::size_t b,
                                       std::uint64_t seed, std::int64_t t);

Batch batch_at(const Dataset& data, std::size_t b, std::uint64_t seed,
               std::int64_t t);

/// Materialises batch `state.counter` and advances the counter.
Batch sample_batch(const Dataset& data, std::size_t b, SamplerState& state);

/// ceil(n / b) batches make one epoch.
std::int64_t batches_per_epoch(std::size_t n, std::size_t b);

}  // namespace adl
