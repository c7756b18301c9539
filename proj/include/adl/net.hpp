// SPDX-License-Identifier: Apache-2.0
//
// Dense feedforward layers with closed-form forward and backward passes.
//
// Tensors passed through layers are either rank 1 ([features]) or rank 2
// ([batch x features]). Every reduction runs in ascending index order so
// that identical inputs give bit-identical outputs regardless of which
// worker evaluates them.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "adl/tensor.hpp"

namespace adl {

enum class LayerKind { Affine, Tanh, Relu, Identity };

struct LayerSpec {
  LayerKind kind = LayerKind::Identity;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;

  static LayerSpec affine(std::size_t in, std::size_t out) {
    return {LayerKind::Affine, in, out};
  }
  static LayerSpec tanh(std::size_t dim) { return {LayerKind::Tanh, dim, dim}; }
  static LayerSpec relu(std::size_t dim) { return {LayerKind::Relu, dim, dim}; }
  static LayerSpec identity(std::size_t dim) {
    return {LayerKind::Identity, dim, dim};
  }

  /// Affine parameters are packed weight-then-bias: W is out_dim x in_dim
  /// row-major (W[o][i] at o * in_dim + i), followed by b[o].
  std::size_t param_count() const noexcept;

  bool operator==(const LayerSpec&) const = default;
};

/// Throws Dimension if the layer description breaks its own dimension rules.
void validate(const LayerSpec& spec);

/// Throws Dimension unless consecutive layers chain (out_dim == next in_dim).
void validate_chain(std::span<const LayerSpec> layers);

const char* to_string(LayerKind kind) noexcept;

enum class LossKind { MeanSquaredError, SoftmaxCrossEntropy };

const char* to_string(LossKind kind) noexcept;

/// Per-layer parameters; parameterless layers hold an empty tensor.
using ParamSet = std::vector<Tensor>;

struct LayerOutput {
  Tensor output;
  /// Affine/relu keep their input, tanh keeps its output, identity keeps nothing.
  Tensor intermediate;
};

LayerOutput layer_forward(const LayerSpec& spec, const Tensor& params,
                          const Tensor& input);

struct LayerGrads {
  Tensor param_grad;
  Tensor input_grad;
};

LayerGrads layer_backward(const LayerSpec& spec, const Tensor& params,
                          const Tensor& intermediate, const Tensor& upstream);

struct LossResult {
  double value = 0.0;
  /// d(loss)/d(prediction); already carries the 1/batch factor.
  Tensor grad;
};

/// MSE: mean over the batch of the summed squared residual.
/// Softmax-CE: mean negative log-likelihood; target holds class labels.
LossResult loss_forward(LossKind kind, const Tensor& prediction,
                        const Tensor& target);

/// Forward through a contiguous run of layers.
struct RangeForward {
  Tensor output;
  std::vector<Tensor> intermediates;
};

RangeForward forward_range(std::span<const LayerSpec> layers,
                           std::span<const Tensor> params, const Tensor& input);

struct RangeBackward {
  std::vector<Tensor> param_grads;
  Tensor input_grad;
};

/// Backward through the same run of layers, last layer first.
RangeBackward backward_range(std::span<const LayerSpec> layers,
                             std::span<const Tensor> params,
                             std::span<const Tensor> intermediates,
                             const Tensor& upstream);

struct NetForward {
  double loss = 0.0;
  std::vector<Tensor> intermediates;
  Tensor output;
  Tensor loss_grad;
};

/// Full-network forward and loss. Throws Divergence on a non-finite loss.
NetForward net_forward(std::span<const LayerSpec> layers,
                       std::span<const Tensor> params, const Tensor& input,
                       LossKind loss, const Tensor& target);

/// Full-network backward from a matching net_forward.
RangeBackward net_backward(std::span<const LayerSpec> layers,
                           std::span<const Tensor> params,
                           const NetForward& forward);

/// Central-difference estimate of d(loss)/d(params), one parameter at a time.
ParamSet finite_diff_grad(std::span<const LayerSpec> layers,
                          std::span<const Tensor> params, const Tensor& input,
                          LossKind loss, const Tensor& target, double step);

/// Glorot-uniform weights and zero biases, drawn from `seed`.
ParamSet init_params(std::span<const LayerSpec> layers, std::uint64_t seed);

std::size_t total_param_count(std::span<const LayerSpec> layers);

}  // namespace adl
