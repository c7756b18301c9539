// SPDX-License-Identifier: Apache-2.0
//
// Staleness arithmetic for the accumulated pipeline and the convergence-bound
// expressions that depend on it.
//
// Indexing: modules k = 1..K (k = K is the module holding the loss), updates
// s = 0, 1, ..., within-group slots j = 0..M-1. The wrapped batch index of
// update s is U_s = M*s. Integer results are exact; averaged staleness is an
// exact rational.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace adl {

/// Reduced fraction with positive denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t num, std::int64_t den);
  double value() const noexcept { return static_cast<double>(num) / den; }
  std::string str() const;

  friend bool operator==(const Rational&, const Rational&) = default;
  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den <
           static_cast<__int128>(b.num) * a.den;
  }
  friend bool operator<=(const Rational& a, const Rational& b) {
    return !(b < a);
  }
  friend Rational operator+(const Rational& a, const Rational& b);
};

/// Floor division for any sign of the numerator; den must be positive.
std::int64_t floor_div(std::int64_t num, std::int64_t den);

/// floor(t/M) - floor((t-d)/M). Requires t >= d >= 0, M >= 1.
std::int64_t level_of_staleness(std::int64_t t, std::int64_t d, std::int64_t M);

/// Batch index whose gradient fills slot j of update s+1 in module k:
/// U_s + j - 2(K-k). Negative during pipeline fill.
std::int64_t slot_batch_index(std::int64_t s, std::int64_t j, std::int64_t K,
                              std::int64_t k, std::int64_t M);

/// d_{k,j} = s - floor((M*s + j - 2(K-k)) / M), unclamped.
std::int64_t module_staleness(std::int64_t s, std::int64_t j, std::int64_t K,
                              std::int64_t k, std::int64_t M);

/// Steady-state closed form max(0, ceil((2(K-k) - j) / M)).
std::int64_t steady_state_staleness(std::int64_t j, std::int64_t K,
                                    std::int64_t k, std::int64_t M);

/// Parameter version a slot gradient is computed against: max(0, s - d_{k,j}).
std::int64_t effective_version(std::int64_t s, std::int64_t j, std::int64_t K,
                               std::int64_t k, std::int64_t M);

/// (1/M) * sum_j d_{k,j} in steady state.
Rational averaged_los(std::int64_t K, std::int64_t k, std::int64_t M);

/// sum over k = 1..K of averaged_los(K, k, M).
Rational total_averaged_los(std::int64_t K, std::int64_t M);

struct BoundInputs {
  double gamma = 0.0;         // learning rate (theorem 1 and 3)
  double grad_norm_sq = 0.0;  // squared norm of the expected gradient
  double A = 1.0;             // bound on the squared stochastic gradient norm
  double L = 1.0;             // Lipschitz constant of the gradient
  std::int64_t M = 1;
  double sum_dbar = 0.0;      // sum over modules of the averaged staleness
  std::int64_t S = 1;         // total number of updates
  double gap = 1.0;           // f(theta_0) - f(theta*)
  double epsilon = 1.0;       // constant-rate scale factor
};

/// Per-update expected loss change bound:
/// -(gamma/2) |g|^2 + gamma^2 A L (1 + sum_dbar/M) / M.
double theorem1_rhs(const BoundInputs& in);

/// Ergodic gradient bound for a non-increasing schedule gamma_0..gamma_{S-1}.
double theorem2_rhs(const BoundInputs& in, std::span<const double> schedule);

struct ConstantRate {
  double gamma = 0.0;
  bool admissible = false;  // L * gamma <= 1
};

/// gamma = eps * sqrt(M * gap / (S A L (1 + sum_dbar/M))).
ConstantRate theorem3_lr(const BoundInputs& in);

/// ((2 + 2 eps^2)/eps) * sqrt(A L gap (1 + sum_dbar/M) / (M S)).
double theorem3_bound(const BoundInputs& in);

/// Estimate of A: the largest observed squared gradient norm.
double estimate_gradient_bound(std::span<const double> grad_norms_sq);

/// Estimate of L: the largest secant ratio |g_a - g_b| / |theta_a - theta_b|
/// over consecutive trajectory points. Pairs with equal parameters are skipped.
double estimate_lipschitz(std::span<const std::vector<double>> params,
                          std::span<const std::vector<double>> grads);

}  // namespace adl
