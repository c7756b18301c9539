// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <adl/data.hpp>
#include <adl/net.hpp>
#include <adl/partition.hpp>
#include <adl/scheduler.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace adl::test {

/// Norm-wise relative error between two parameter sets.
inline double relative_error(const ParamSet& a, const ParamSet& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    for (std::size_t i = 0; i < a[l].size(); ++i) {
      diff += (a[l][i] - b[l][i]) * (a[l][i] - b[l][i]);
      na += a[l][i] * a[l][i];
      nb += b[l][i] * b[l][i];
    }
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / scale;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : t.values()) v = normal(rng);
  return t;
}

/// Random chain of affine layers with a tanh/relu/identity after each
/// hidden affine; the last layer is affine.
inline std::vector<LayerSpec> random_net(std::mt19937_64& rng, std::size_t in,
                                         std::size_t out, int hidden_affine) {
  std::uniform_int_distribution<std::size_t> width(2, 6);
  std::uniform_int_distribution<int> act(0, 2);
  std::vector<LayerSpec> layers;
  std::size_t cur = in;
  for (int h = 0; h < hidden_affine; ++h) {
    const std::size_t w = width(rng);
    layers.push_back(LayerSpec::affine(cur, w));
    switch (act(rng)) {
      case 0: layers.push_back(LayerSpec::tanh(w)); break;
      case 1: layers.push_back(LayerSpec::relu(w)); break;
      default: layers.push_back(LayerSpec::identity(w)); break;
    }
    cur = w;
  }
  layers.push_back(LayerSpec::affine(cur, out));
  return layers;
}

/// Alternating affine/tanh layers, `layers` in total. The last affine layer
/// maps to `out`; an even count ends with a tanh on the output.
inline std::vector<LayerSpec> tanh_net(std::size_t in, std::size_t hidden,
                                       std::size_t out, int layers) {
  const int last_affine = (layers % 2 == 0) ? layers - 2 : layers - 1;
  std::vector<LayerSpec> net;
  std::size_t cur = in;
  for (int l = 0; l < layers; ++l) {
    if (l % 2 == 0) {
      const std::size_t next = (l == last_affine) ? out : hidden;
      net.push_back(LayerSpec::affine(cur, next));
      cur = next;
    } else {
      net.push_back(LayerSpec::tanh(cur));
    }
  }
  return net;
}

inline TrainConfig spirals_config(std::size_t K, std::int64_t M,
                                  std::uint64_t seed, std::int64_t updates) {
  TrainConfig c;
  c.layers = tanh_net(2, 8, 2, 6);
  c.partition = partition_even(c.layers.size(), K);
  c.loss = LossKind::SoftmaxCrossEntropy;
  c.M = M;
  c.batch_size = 8;
  c.updates = updates;
  c.schedule = ConstantLr{0.1};
  c.init_seed = seed;
  c.sampler_seed = seed + 1000;
  return c;
}

}  // namespace adl::test
