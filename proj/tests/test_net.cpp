// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <adl/error.hpp>
#include <adl/net.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "support.hpp"

using namespace adl;
using adl::test::random_net;
using adl::test::random_tensor;
using adl::test::relative_error;

namespace {

Tensor affine_params(std::size_t in, std::size_t out, std::vector<double> v) {
  REQUIRE(v.size() == in * out + out);
  return Tensor({in * out + out}, std::move(v));
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("layer_forward examples") {
  const auto a11 = LayerSpec::affine(1, 1);
  auto out = layer_forward(a11, affine_params(1, 1, {2.0, 0.0}), Tensor::vector({3.0}));
  CHECK(out.output == Tensor::vector({6.0}));

  out = layer_forward(LayerSpec::relu(2), Tensor(), Tensor::vector({-1.0, 2.0}));
  CHECK(out.output == Tensor::vector({0.0, 2.0}));

  out = layer_forward(LayerSpec::affine(2, 1), affine_params(2, 1, {1.0, 1.0, 1.0}),
                      Tensor::vector({2.0, 3.0}));
  CHECK(out.output == Tensor::vector({6.0}));
}

TEST_CASE("layer_forward batch shape and dimension errors") {
  const auto spec = LayerSpec::affine(2, 3);
  Tensor p({9}, 0.5);
  const auto out = layer_forward(spec, p, Tensor::matrix(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}));
  CHECK(out.output.shape() == std::vector<std::size_t>{4, 3});

  try {
    layer_forward(spec, p, Tensor::vector({1.0, 2.0, 3.0}));
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
  }
  CHECK_THROWS_AS(layer_forward(spec, Tensor({4}), Tensor::vector({1.0, 2.0})), Error);
  CHECK_THROWS_AS(validate(LayerSpec{LayerKind::Tanh, 2, 3}), Error);
  CHECK_THROWS_AS(validate(LayerSpec::affine(0, 3)), Error);
  CHECK_THROWS_AS(validate_chain(std::vector{LayerSpec::affine(2, 3), LayerSpec::tanh(2)}),
                  Error);
}

TEST_CASE("layer_backward examples") {
  const auto a11 = LayerSpec::affine(1, 1);
  const Tensor p = affine_params(1, 1, {2.0, 0.0});
  const auto fwd = layer_forward(a11, p, Tensor::vector({3.0}));
  const auto g = layer_backward(a11, p, fwd.intermediate, Tensor::vector({1.0}));
  CHECK(g.param_grad[0] == 3.0);
  CHECK(g.param_grad[1] == 1.0);
  CHECK(g.input_grad == Tensor::vector({2.0}));

  const auto relu = LayerSpec::relu(1);
  const auto rf = layer_forward(relu, Tensor(), Tensor::vector({-1.0}));
  const auto rg = layer_backward(relu, Tensor(), rf.intermediate, Tensor::vector({5.0}));
  CHECK(rg.input_grad == Tensor::vector({0.0}));

  // Subgradient at exactly zero is 0.
  const auto zf = layer_forward(relu, Tensor(), Tensor::vector({0.0}));
  CHECK(layer_backward(relu, Tensor(), zf.intermediate, Tensor::vector({5.0})).input_grad ==
        Tensor::vector({0.0}));

  CHECK_THROWS_AS(layer_backward(a11, p, fwd.intermediate, Tensor::vector({1.0, 2.0})), Error);
}

TEST_CASE("each layer kind matches finite differences") {
  std::mt19937_64 rng(11);
  const std::vector<LayerSpec> kinds = {LayerSpec::affine(3, 4), LayerSpec::tanh(3),
                                        LayerSpec::relu(3), LayerSpec::identity(3)};
  for (const auto& spec : kinds) {
    CAPTURE(to_string(spec.kind));
    const std::vector<LayerSpec> one{spec};
    const ParamSet params = init_params(one, 5);
    const Tensor x = random_tensor({5, 3}, rng);
    const Tensor y = random_tensor({5, spec.out_dim}, rng);
    const NetForward fwd = net_forward(one, params, x, LossKind::MeanSquaredError, y);
    const RangeBackward bwd = net_backward(one, params, fwd);
    const ParamSet fd = finite_diff_grad(one, params, x, LossKind::MeanSquaredError, y, 1e-5);
    CHECK(relative_error(bwd.param_grads, fd) < 1e-6);

    // Input gradient against central differences of the loss in the input.
    Tensor xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = xp[i];
      xp[i] = orig + 1e-5;
      const double up = net_forward(one, params, xp, LossKind::MeanSquaredError, y).loss;
      xp[i] = orig - 1e-5;
      const double down = net_forward(one, params, xp, LossKind::MeanSquaredError, y).loss;
      xp[i] = orig;
      const double est = (up - down) / 2e-5;
      CHECK(std::abs(est - bwd.input_grad[i]) <= 1e-6 * std::max(1.0, std::abs(est)));
    }
  }
}

TEST_CASE("net_forward loss examples") {
  const std::vector<LayerSpec> ident{LayerSpec::identity(2)};
  const Tensor x = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(net_forward(ident, ParamSet{Tensor()}, x, LossKind::MeanSquaredError, x).loss == 0.0);

  const std::vector<LayerSpec> lin{LayerSpec::affine(1, 1)};
  const ParamSet w{affine_params(1, 1, {1.0, 0.0})};
  const auto f = net_forward(lin, w, Tensor::matrix(1, 1, {1.0}), LossKind::MeanSquaredError,
                             Tensor::matrix(1, 1, {3.0}));
  CHECK(f.loss == 4.0);

  for (std::size_t C : {2u, 3u, 10u}) {
    const std::vector<LayerSpec> id{LayerSpec::identity(C)};
    const Tensor logits({3, C}, 0.7);
    const Tensor labels = Tensor::vector({0.0, 1.0, static_cast<double>(C - 1)});
    const double loss =
        net_forward(id, ParamSet{Tensor()}, logits, LossKind::SoftmaxCrossEntropy, labels).loss;
    CHECK(loss == doctest::Approx(std::log(static_cast<double>(C))).epsilon(1e-14));
  }
}

TEST_CASE("softmax-CE is stable for large logits and validates labels") {
  const std::vector<LayerSpec> id{LayerSpec::identity(2)};
  const Tensor logits = Tensor::matrix(1, 2, {1000.0, 0.0});
  const double loss = net_forward(id, ParamSet{Tensor()}, logits, LossKind::SoftmaxCrossEntropy,
                                  Tensor::vector({1.0}))
                          .loss;
  CHECK(loss == doctest::Approx(1000.0));
  CHECK_THROWS_AS(net_forward(id, ParamSet{Tensor()}, logits, LossKind::SoftmaxCrossEntropy,
                              Tensor::vector({2.0})),
                  Error);
  CHECK_THROWS_AS(net_forward(id, ParamSet{Tensor()}, logits, LossKind::SoftmaxCrossEntropy,
                              Tensor::vector({0.5})),
                  Error);
}

TEST_CASE("non-finite loss raises the divergence signal") {
  const std::vector<LayerSpec> id{LayerSpec::identity(1)};
  const Tensor x = Tensor::matrix(1, 1, {std::numeric_limits<double>::infinity()});
  try {
    net_forward(id, ParamSet{Tensor()}, x, LossKind::MeanSquaredError, Tensor::matrix(1, 1, {0}));
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Divergence);
  }
}

TEST_CASE("net_backward examples") {
  // Half-scaled quadratic 1/2 (wx - y)^2: the MSE gradient is twice its gradient.
  const std::vector<LayerSpec> lin{LayerSpec::affine(1, 1)};
  const ParamSet w{affine_params(1, 1, {1.0, 0.0})};
  const auto f = net_forward(lin, w, Tensor::matrix(1, 1, {1.0}), LossKind::MeanSquaredError,
                             Tensor::matrix(1, 1, {3.0}));
  const auto g = net_backward(lin, w, f);
  CHECK(g.param_grads[0][0] / 2.0 == -2.0);
  CHECK(g.param_grads[0][0] == -4.0);

  // Input equals target: every gradient vanishes.
  std::mt19937_64 rng(3);
  const std::vector<LayerSpec> net{LayerSpec::identity(3), LayerSpec::identity(3)};
  const Tensor x = random_tensor({4, 3}, rng);
  const auto fz = net_forward(net, ParamSet{Tensor(), Tensor()}, x, LossKind::MeanSquaredError, x);
  const auto gz = net_backward(net, ParamSet{Tensor(), Tensor()}, fz);
  for (double v : gz.input_grad.values()) CHECK(v == 0.0);

  const std::vector<LayerSpec> aff{LayerSpec::affine(3, 3)};
  ParamSet eye{Tensor({12}, 0.0)};
  eye[0][0] = eye[0][4] = eye[0][8] = 1.0;
  const auto fa = net_forward(aff, eye, x, LossKind::MeanSquaredError, x);
  const auto ga = net_backward(aff, eye, fa);
  for (double v : ga.param_grads[0].values()) CHECK(v == 0.0);
}

TEST_CASE("random 3-layer net matches finite differences") {
  std::mt19937_64 rng(2024);
  const std::vector<LayerSpec> net{LayerSpec::affine(4, 5), LayerSpec::tanh(5),
                                   LayerSpec::affine(5, 2)};
  const ParamSet params = init_params(net, 9);
  const Tensor x = random_tensor({6, 4}, rng);
  const Tensor y = random_tensor({6, 2}, rng);
  const auto fwd = net_forward(net, params, x, LossKind::MeanSquaredError, y);
  const auto bwd = net_backward(net, params, fwd);
  const auto fd = finite_diff_grad(net, params, x, LossKind::MeanSquaredError, y, 1e-5);
  CHECK(relative_error(bwd.param_grads, fd) < 1e-6);
}

TEST_CASE("finite differences on a linear net match the closed form") {
  // MSE of y_hat = W x + b: dW = (2/B) sum_n r_n x_n^T, db = (2/B) sum_n r_n.
  std::mt19937_64 rng(77);
  const std::size_t B = 7, in = 3, out = 2;
  const std::vector<LayerSpec> net{LayerSpec::affine(in, out)};
  const ParamSet params{random_tensor({in * out + out}, rng)};
  const Tensor x = random_tensor({B, in}, rng);
  const Tensor y = random_tensor({B, out}, rng);
  ParamSet analytic{Tensor({in * out + out})};
  for (std::size_t n = 0; n < B; ++n) {
    for (std::size_t o = 0; o < out; ++o) {
      double pred = params[0][in * out + o];
      for (std::size_t i = 0; i < in; ++i) pred += params[0][o * in + i] * x.at(n, i);
      const double r = pred - y.at(n, o);
      for (std::size_t i = 0; i < in; ++i) analytic[0][o * in + i] += 2.0 * r * x.at(n, i) / B;
      analytic[0][in * out + o] += 2.0 * r / B;
    }
  }
  const auto fd = finite_diff_grad(net, params, x, LossKind::MeanSquaredError, y, 1e-5);
  for (std::size_t i = 0; i < analytic[0].size(); ++i) {
    CHECK(std::abs(fd[0][i] - analytic[0][i]) < 1e-9);
  }
}

TEST_CASE("finite differences of a constant surface are zero") {
  // Large negative biases keep every ReLU input negative, so the loss is flat.
  const std::vector<LayerSpec> net{LayerSpec::affine(2, 2), LayerSpec::relu(2)};
  ParamSet params{Tensor({6}, 0.0), Tensor()};
  params[0][4] = params[0][5] = -100.0;
  const Tensor x = Tensor::matrix(2, 2, {0.1, 0.2, -0.3, 0.4});
  const Tensor y = Tensor::matrix(2, 2, {1, 1, 1, 1});
  const auto fd = finite_diff_grad(net, params, x, LossKind::MeanSquaredError, y, 1e-5);
  for (double v : fd[0].values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(finite_diff_grad(net, params, x, LossKind::MeanSquaredError, y, 0.0), Error);
}

TEST_CASE("net_forward is deterministic") {
  std::mt19937_64 rng(5);
  const auto net = random_net(rng, 3, 2, 3);
  const ParamSet params = init_params(net, 1);
  const Tensor x = random_tensor({8, 3}, rng);
  const Tensor y = random_tensor({8, 2}, rng);
  const auto a = net_forward(net, params, x, LossKind::MeanSquaredError, y);
  const auto b = net_forward(net, params, x, LossKind::MeanSquaredError, y);
  CHECK(a.loss == b.loss);
  CHECK(a.output == b.output);
  CHECK(net_backward(net, params, a).param_grads == net_backward(net, params, b).param_grads);
  CHECK(init_params(net, 1) == params);
  CHECK(init_params(net, 2) != params);
}

TEST_CASE("backward is linear in the upstream gradient") {
  std::mt19937_64 rng(8);
  const std::vector<LayerSpec> net{LayerSpec::affine(3, 4), LayerSpec::identity(4),
                                   LayerSpec::affine(4, 2)};
  const ParamSet params = init_params(net, 4);
  const Tensor x = random_tensor({5, 3}, rng);
  const auto fwd = forward_range(net, params, x);
  const Tensor g = random_tensor({5, 2}, rng);
  Tensor g2 = g;
  for (double& v : g2.values()) v *= 0.5;  // power of two keeps products exact
  const auto b1 = backward_range(net, params, fwd.intermediates, g);
  const auto b2 = backward_range(net, params, fwd.intermediates, g2);
  for (std::size_t l = 0; l < net.size(); ++l) {
    for (std::size_t i = 0; i < b1.param_grads[l].size(); ++i) {
      CHECK(b2.param_grads[l][i] == 0.5 * b1.param_grads[l][i]);
    }
  }
  for (std::size_t i = 0; i < b1.input_grad.size(); ++i) {
    CHECK(b2.input_grad[i] == 0.5 * b1.input_grad[i]);
  }

  // ReLU away from zero with a general scale: equal up to rounding.
  const std::vector<LayerSpec> rnet{LayerSpec::affine(3, 4), LayerSpec::relu(4),
                                    LayerSpec::affine(4, 2)};
  const ParamSet rp = init_params(rnet, 6);
  const auto rf = forward_range(rnet, rp, x);
  Tensor g3 = g;
  for (double& v : g3.values()) v *= 3.7;
  const auto r1 = backward_range(rnet, rp, rf.intermediates, g);
  const auto r3 = backward_range(rnet, rp, rf.intermediates, g3);
  for (std::size_t l = 0; l < rnet.size(); ++l) {
    for (std::size_t i = 0; i < r1.param_grads[l].size(); ++i) {
      CHECK(r3.param_grads[l][i] == doctest::Approx(3.7 * r1.param_grads[l][i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("affine layout is weight-then-bias and init is Glorot with zero bias") {
  const std::vector<LayerSpec> net{LayerSpec::affine(3, 2), LayerSpec::tanh(2)};
  CHECK(net[0].param_count() == 8);
  CHECK(net[1].param_count() == 0);
  CHECK(total_param_count(net) == 8);
  const ParamSet p = init_params(net, 3);
  REQUIRE(p.size() == 2);
  CHECK(p[1].empty());
  const double limit = std::sqrt(6.0 / 5.0);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(p[0][i]) <= limit);
  CHECK(p[0][6] == 0.0);
  CHECK(p[0][7] == 0.0);

  // W[o][i] sits at o * in + i.
  Tensor w({8}, 0.0);
  w[1 * 3 + 2] = 1.0;
  w[7] = 0.5;
  const auto out = layer_forward(net[0], w, Tensor::vector({0.0, 0.0, 4.0}));
  CHECK(out.output == Tensor::vector({0.0, 4.5}));
}

}  // TEST_SUITE
