// SPDX-License-Identifier: Apache-2.0
#include "adl/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "adl/error.hpp"

namespace adl {
namespace {

void check_features(const Tensor& t, std::size_t dim, const char* what) {
  if (t.rank() < 1 || t.rank() > 2 || t.cols() != dim) {
    fail(ErrorKind::Dimension, std::string(what) + " has shape " +
                                   shape_string(t.shape()) + ", expected " +
                                   std::to_string(dim) + " features");
  }
}

std::vector<std::size_t> with_features(const Tensor& like, std::size_t dim) {
  if (like.rank() == 1) return {dim};
  return {like.rows(), dim};
}

}  // namespace

std::size_t LayerSpec::param_count() const noexcept {
  return kind == LayerKind::Affine ? out_dim * in_dim + out_dim : 0;
}

void validate(const LayerSpec& spec) {
  if (spec.kind == LayerKind::Affine) {
    if (spec.in_dim < 1 || spec.out_dim < 1) {
      fail(ErrorKind::Dimension, "affine layer needs in_dim, out_dim >= 1");
    }
  } else if (spec.in_dim != spec.out_dim || spec.in_dim < 1) {
    fail(ErrorKind::Dimension, std::string(to_string(spec.kind)) +
                                   " layer needs in_dim == out_dim >= 1");
  }
}

void validate_chain(std::span<const LayerSpec> layers) {
  if (layers.empty()) fail(ErrorKind::Dimension, "network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    validate(layers[l]);
    if (l > 0 && layers[l - 1].out_dim != layers[l].in_dim) {
      fail(ErrorKind::Dimension,
           "layer " + std::to_string(l + 1) + " expects " +
               std::to_string(layers[l].in_dim) + " inputs but layer " +
               std::to_string(l) + " produces " +
               std::to_string(layers[l - 1].out_dim));
    }
  }
}

const char* to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::Affine: return "affine";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::Relu: return "relu";
    case LayerKind::Identity: return "identity";
  }
  return "?";
}

const char* to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::MeanSquaredError: return "mse";
    case LossKind::SoftmaxCrossEntropy: return "softmax-ce";
  }
  return "?";
}

LayerOutput layer_forward(const LayerSpec& spec, const Tensor& params,
                          const Tensor& input) {
  check_features(input, spec.in_dim, "layer input");
  if (params.size() != spec.param_count()) {
    fail(ErrorKind::Dimension, "parameter count mismatch for " +
                                   std::string(to_string(spec.kind)) + " layer");
  }
  const std::size_t batch = input.rows();
  switch (spec.kind) {
    case LayerKind::Affine: {
      Tensor out(with_features(input, spec.out_dim));
      const std::size_t in = spec.in_dim;
      const std::size_t bias = spec.out_dim * in;
      // y[n][o] = (sum_i W[o][i] x[n][i]) + b[o], i ascending.
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < spec.out_dim; ++o) {
          double acc = 0.0;
          for (std::size_t i = 0; i < in; ++i) {
            acc += params[o * in + i] * input[n * in + i];
          }
          out[n * spec.out_dim + o] = acc + params[bias + o];
        }
      }
      return {std::move(out), input};
    }
    case LayerKind::Tanh: {
      Tensor out = input;
      for (double& v : out.values()) v = std::tanh(v);
      Tensor saved = out;
      return {std::move(out), std::move(saved)};
    }
    case LayerKind::Relu: {
      Tensor out = input;
      for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
      return {std::move(out), input};
    }
    case LayerKind::Identity:
      return {input, Tensor()};
  }
  fail(ErrorKind::Dimension, "unknown layer kind");
}

LayerGrads layer_backward(const LayerSpec& spec, const Tensor& params,
                          const Tensor& intermediate, const Tensor& upstream) {
  check_features(upstream, spec.out_dim, "upstream gradient");
  const std::size_t batch = upstream.rows();
  switch (spec.kind) {
    case LayerKind::Affine: {
      check_features(intermediate, spec.in_dim, "affine intermediate");
      if (intermediate.rows() != batch) {
        fail(ErrorKind::Dimension, "batch mismatch in affine backward");
      }
      const std::size_t in = spec.in_dim;
      const std::size_t out = spec.out_dim;
      Tensor dparams({spec.param_count()});
      // dW[o][i] = sum_n dy[n][o] x[n][i]; db[o] = sum_n dy[n][o], n ascending.
      for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) {
          double acc = 0.0;
          for (std::size_t n = 0; n < batch; ++n) {
            acc += upstream[n * out + o] * intermediate[n * in + i];
          }
          dparams[o * in + i] = acc;
        }
        double acc = 0.0;
        for (std::size_t n = 0; n < batch; ++n) acc += upstream[n * out + o];
        dparams[out * in + o] = acc;
      }
      // dx[n][i] = sum_o dy[n][o] W[o][i], o ascending.
      Tensor dx(with_features(upstream, in));
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t i = 0; i < in; ++i) {
          double acc = 0.0;
          for (std::size_t o = 0; o < out; ++o) {
            acc += upstream[n * out + o] * params[o * in + i];
          }
          dx[n * in + i] = acc;
        }
      }
      return {std::move(dparams), std::move(dx)};
    }
    case LayerKind::Tanh: {
      if (intermediate.shape() != upstream.shape()) {
        fail(ErrorKind::Dimension, "tanh intermediate/upstream shape mismatch");
      }
      Tensor dx = upstream;
      for (std::size_t i = 0; i < dx.size(); ++i) {
        const double y = intermediate[i];
        dx[i] = upstream[i] * (1.0 - y * y);
      }
      return {Tensor(), std::move(dx)};
    }
    case LayerKind::Relu: {
      if (intermediate.shape() != upstream.shape()) {
        fail(ErrorKind::Dimension, "relu intermediate/upstream shape mismatch");
      }
      Tensor dx = upstream;
      // Derivative at exactly 0 is taken as 0.
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (!(intermediate[i] > 0.0)) dx[i] = 0.0;
      }
      return {Tensor(), std::move(dx)};
    }
    case LayerKind::Identity:
      return {Tensor(), upstream};
  }
  fail(ErrorKind::Dimension, "unknown layer kind");
}

LossResult loss_forward(LossKind kind, const Tensor& prediction,
                        const Tensor& target) {
  const std::size_t batch = prediction.rows();
  const std::size_t dim = prediction.cols();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  LossResult result;
  result.grad = Tensor(prediction.shape());
  if (kind == LossKind::MeanSquaredError) {
    if (target.shape() != prediction.shape()) {
      fail(ErrorKind::Dimension, "MSE target shape " +
                                     shape_string(target.shape()) +
                                     " != prediction shape " +
                                     shape_string(prediction.shape()));
    }
    double total = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      double row = 0.0;
      for (std::size_t o = 0; o < dim; ++o) {
        const double r = prediction[n * dim + o] - target[n * dim + o];
        row += r * r;
        result.grad[n * dim + o] = 2.0 * r * inv_batch;
      }
      total += row;
    }
    result.value = total * inv_batch;
  } else {
    if (target.size() != batch) {
      fail(ErrorKind::Dimension, "softmax-CE needs one label per batch row");
    }
    double total = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      const double label_value = target[n];
      const auto label = static_cast<std::size_t>(label_value);
      if (label_value < 0.0 || label_value != std::floor(label_value) ||
          label >= dim) {
        fail(ErrorKind::Domain, "class label " + std::to_string(label_value) +
                                    " outside [0, " + std::to_string(dim) + ")");
      }
      const double* logits = prediction.values().data() + n * dim;
      double peak = logits[0];
      for (std::size_t c = 1; c < dim; ++c) peak = std::max(peak, logits[c]);
      double z = 0.0;
      for (std::size_t c = 0; c < dim; ++c) z += std::exp(logits[c] - peak);
      const double log_z = std::log(z);
      total += -(logits[label] - peak - log_z);
      for (std::size_t c = 0; c < dim; ++c) {
        const double p = std::exp(logits[c] - peak - log_z);
        result.grad[n * dim + c] = (p - (c == label ? 1.0 : 0.0)) * inv_batch;
      }
    }
    result.value = total * inv_batch;
  }
  return result;
}

RangeForward forward_range(std::span<const LayerSpec> layers,
                           std::span<const Tensor> params, const Tensor& input) {
  if (params.size() != layers.size()) {
    fail(ErrorKind::Dimension, "one parameter tensor per layer required");
  }
  RangeForward result;
  result.intermediates.reserve(layers.size());
  Tensor current = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerOutput out = layer_forward(layers[l], params[l], current);
    result.intermediates.push_back(std::move(out.intermediate));
    current = std::move(out.output);
  }
  result.output = std::move(current);
  return result;
}

RangeBackward backward_range(std::span<const LayerSpec> layers,
                             std::span<const Tensor> params,
                             std::span<const Tensor> intermediates,
                             const Tensor& upstream) {
  if (params.size() != layers.size() || intermediates.size() != layers.size()) {
    fail(ErrorKind::Dimension, "backward needs one context per layer");
  }
  RangeBackward result;
  result.param_grads.resize(layers.size());
  Tensor grad = upstream;
  for (std::size_t l = layers.size(); l-- > 0;) {
    LayerGrads g = layer_backward(layers[l], params[l], intermediates[l], grad);
    result.param_grads[l] = std::move(g.param_grad);
    grad = std::move(g.input_grad);
  }
  result.input_grad = std::move(grad);
  return result;
}

NetForward net_forward(std::span<const LayerSpec> layers,
                       std::span<const Tensor> params, const Tensor& input,
                       LossKind loss, const Tensor& target) {
  RangeForward fwd = forward_range(layers, params, input);
  LossResult lr = loss_forward(loss, fwd.output, target);
  if (!std::isfinite(lr.value)) {
    fail(ErrorKind::Divergence, "non-finite loss");
  }
  return {lr.value, std::move(fwd.intermediates), std::move(fwd.output),
          std::move(lr.grad)};
}

RangeBackward net_backward(std::span<const LayerSpec> layers,
                           std::span<const Tensor> params,
                           const NetForward& forward) {
  return backward_range(layers, params, forward.intermediates, forward.loss_grad);
}

ParamSet finite_diff_grad(std::span<const LayerSpec> layers,
                          std::span<const Tensor> params, const Tensor& input,
                          LossKind loss, const Tensor& target, double step) {
  if (!(step > 0.0)) fail(ErrorKind::Domain, "finite-difference step must be > 0");
  ParamSet probe(params.begin(), params.end());
  ParamSet grads;
  grads.reserve(params.size());
  auto eval = [&] {
    return loss_forward(loss, forward_range(layers, probe, input).output, target)
        .value;
  };
  for (std::size_t l = 0; l < probe.size(); ++l) {
    Tensor g(probe[l].shape());
    for (std::size_t i = 0; i < probe[l].size(); ++i) {
      const double saved = probe[l][i];
      probe[l][i] = saved + step;
      const double up = eval();
      probe[l][i] = saved - step;
      const double down = eval();
      probe[l][i] = saved;
      g[i] = (up - down) / (2.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

ParamSet init_params(std::span<const LayerSpec> layers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamSet params;
  params.reserve(layers.size());
  for (const LayerSpec& spec : layers) {
    if (spec.kind != LayerKind::Affine) {
      params.emplace_back();
      continue;
    }
    Tensor p({spec.param_count()});
    const double limit =
        std::sqrt(6.0 / static_cast<double>(spec.in_dim + spec.out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < spec.out_dim * spec.in_dim; ++i) p[i] = dist(rng);
    params.push_back(std::move(p));
  }
  return params;
}

std::size_t total_param_count(std::span<const LayerSpec> layers) {
  std::size_t n = 0;
  for (const LayerSpec& spec : layers) n += spec.param_count();
  return n;
}

}  // namespace adl
