// SPDX-License-Identifier: Apache-2.0
#include "adl/data.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "adl/error.hpp"

namespace adl {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Unbiased draw in [0, n) by rejection on the top of the 64-bit range.
std::size_t uniform_index(std::uint64_t key, std::uint64_t& counter,
                          std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
  for (;;) {
    const std::uint64_t r = splitmix64(key + counter++);
    if (r < limit) return static_cast<std::size_t>(r % range);
  }
}

}  // namespace

Dataset gen_linreg(std::size_t n, std::size_t dim, double noise_std,
                   std::uint64_t seed, std::size_t out_dim) {
  if (n < 1 || dim < 1 || out_dim < 1) {
    fail(ErrorKind::Config, "linreg needs n, dim, out_dim >= 1");
  }
  if (!(noise_std >= 0.0)) fail(ErrorKind::Config, "noise_std must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<double> w(out_dim * dim);
  for (double& v : w) v = normal(rng) * w_scale;

  Dataset d;
  d.inputs = Tensor({n, dim});
  d.targets = Tensor({n, out_dim});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dim; ++c) d.inputs.at(i, c) = normal(rng);
    for (std::size_t o = 0; o < out_dim; ++o) {
      double y = 0.0;
      for (std::size_t c = 0; c < dim; ++c) y += w[o * dim + c] * d.inputs.at(i, c);
      d.targets.at(i, o) = y + noise_std * normal(rng);
    }
  }
  d.generator = "linreg";
  d.seed = seed;
  return d;
}

Dataset gen_two_spirals(std::size_t n, double noise_std, std::uint64_t seed) {
  if (n < 2) fail(ErrorKind::Config, "two-spirals needs n >= 2");
  if (!(noise_std >= 0.0)) fail(ErrorKind::Config, "noise_std must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset d;
  d.inputs = Tensor({n, 2});
  d.targets = Tensor({n});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    // Radius grows with angle over 1.75 turns; class 1 is rotated by pi.
    const double u = std::sqrt(unit(rng));
    const double angle = u * 3.5 * std::numbers::pi;
    const double radius = u;
    const double phase = label == 0 ? 0.0 : std::numbers::pi;
    d.inputs.at(i, 0) = radius * std::cos(angle + phase) + noise_std * normal(rng);
    d.inputs.at(i, 1) = radius * std::sin(angle + phase) + noise_std * normal(rng);
    d.targets[i] = static_cast<double>(label);
  }
  d.classification = true;
  d.num_classes = 2;
  d.generator = "two-spirals";
  d.seed = seed;
  return d;
}

std::vector<std::size_t> batch_indices(std::size_t n, std::size_t b,
                                       std::uint64_t seed, std::int64_t t) {
  if (b < 1) fail(ErrorKind::Config, "batch size must be >= 1");
  if (n < 1) fail(ErrorKind::Config, "dataset is empty");
  if (t < 0) fail(ErrorKind::Domain, "batch index must be >= 0");
  const std::uint64_t key =
      splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(t));
  std::uint64_t counter = 0;
  std::vector<std::size_t> idx(b);
  for (std::size_t i = 0; i < b; ++i) idx[i] = uniform_index(key, counter, n);
  return idx;
}

Batch batch_at(const Dataset& data, std::size_t b, std::uint64_t seed,
               std::int64_t t) {
  const std::vector<std::size_t> idx = batch_indices(data.size(), b, seed, t);
  const std::size_t dim = data.input_dim();
  Batch batch;
  batch.inputs = Tensor({b, dim});
  if (data.classification) {
    batch.targets = Tensor({b});
  } else {
    batch.targets = Tensor({b, data.targets.cols()});
  }
  const std::size_t tcols = data.classification ? 1 : data.targets.cols();
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      batch.inputs[r * dim + c] = data.inputs[idx[r] * dim + c];
    }
    for (std::size_t c = 0; c < tcols; ++c) {
      batch.targets[r * tcols + c] = data.targets[idx[r] * tcols + c];
    }
  }
  return batch;
}

Batch sample_batch(const Dataset& data, std::size_t b, SamplerState& state) {
  Batch batch = batch_at(data, b, state.seed, state.counter);
  ++state.counter;
  return batch;
}

std::int64_t batches_per_epoch(std::size_t n, std::size_t b) {
  if (b < 1) fail(ErrorKind::Config, "batch size must be >= 1");
  return static_cast<std::int64_t>((n + b - 1) / b);
}

}  // namespace adl
