// SPDX-License-Identifier: Apache-2.0
#include "adl/staleness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adl/error.hpp"

namespace adl {
namespace {

void check_query(std::int64_t s, std::int64_t j, std::int64_t K,
                 std::int64_t k, std::int64_t M) {
  if (K < 1 || k < 1 || k > K || M < 1 || s < 0 || j < 0 || j >= M) {
    fail(ErrorKind::Domain,
         "staleness query out of range (s=" + std::to_string(s) +
             ", j=" + std::to_string(j) + ", K=" + std::to_string(K) +
             ", k=" + std::to_string(k) + ", M=" + std::to_string(M) + ")");
  }
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    fail(ErrorKind::Domain, std::string(name) + " must be positive and finite");
  }
}

void check_common(const BoundInputs& in) {
  check_positive(in.A, "A");
  check_positive(in.L, "L");
  if (in.M < 1) fail(ErrorKind::Domain, "M must be >= 1");
  if (!(in.sum_dbar >= 0.0)) fail(ErrorKind::Domain, "sum of staleness must be >= 0");
}

double staleness_factor(const BoundInputs& in) {
  return 1.0 + in.sum_dbar / static_cast<double>(in.M);
}

}  // namespace

Rational Rational::make(std::int64_t num, std::int64_t den) {
  if (den == 0) fail(ErrorKind::Domain, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  return {num / g, den / g};
}

std::string Rational::str() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

Rational operator+(const Rational& a, const Rational& b) {
  return Rational::make(a.num * b.den + b.num * a.den, a.den * b.den);
}

std::int64_t floor_div(std::int64_t num, std::int64_t den) {
  std::int64_t q = num / den;
  if ((num % den != 0) && (num < 0)) --q;
  return q;
}

std::int64_t level_of_staleness(std::int64_t t, std::int64_t d, std::int64_t M) {
  if (M < 1 || d < 0 || t < d) {
    fail(ErrorKind::Domain, "level of staleness needs t >= d >= 0 and M >= 1");
  }
  return t / M - (t - d) / M;
}

std::int64_t slot_batch_index(std::int64_t s, std::int64_t j, std::int64_t K,
                              std::int64_t k, std::int64_t M) {
  check_query(s, j, K, k, M);
  return M * s + j - 2 * (K - k);
}

std::int64_t module_staleness(std::int64_t s, std::int64_t j, std::int64_t K,
                              std::int64_t k, std::int64_t M) {
  return s - floor_div(slot_batch_index(s, j, K, k, M), M);
}

std::int64_t steady_state_staleness(std::int64_t j, std::int64_t K,
                                    std::int64_t k, std::int64_t M) {
  check_query(0, j, K, k, M);
  // ceil(x/M) == -floor(-x/M)
  return std::max<std::int64_t>(0, -floor_div(j - 2 * (K - k), M));
}

std::int64_t effective_version(std::int64_t s, std::int64_t j, std::int64_t K,
                               std::int64_t k, std::int64_t M) {
  return std::max<std::int64_t>(0, s - module_staleness(s, j, K, k, M));
}

Rational averaged_los(std::int64_t K, std::int64_t k, std::int64_t M) {
  std::int64_t sum = 0;
  for (std::int64_t j = 0; j < M; ++j) sum += steady_state_staleness(j, K, k, M);
  return Rational::make(sum, M);
}

Rational total_averaged_los(std::int64_t K, std::int64_t M) {
  Rational total{0, 1};
  for (std::int64_t k = 1; k <= K; ++k) total = total + averaged_los(K, k, M);
  return total;
}

double theorem1_rhs(const BoundInputs& in) {
  check_common(in);
  if (!(in.gamma >= 0.0)) fail(ErrorKind::Domain, "learning rate must be >= 0");
  if (in.L * in.gamma > 1.0) {
    fail(ErrorKind::Domain, "requires L * gamma <= 1");
  }
  const double g = in.gamma;
  return -(g / 2.0) * in.grad_norm_sq +
         g * g * in.A * in.L * staleness_factor(in) / static_cast<double>(in.M);
}

namespace {

// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace

double theorem2_rhs(const BoundInputs& in, std::span<const double> schedule) {
  check_common(in);
  if (schedule.empty()) fail(ErrorKind::Domain, "empty learning-rate schedule");
  if (in.L * schedule.front() > 1.0) {
    fail(ErrorKind::Domain, "requires L * gamma_0 <= 1");
  }
  CompensatedSum total;
  CompensatedSum total_sq;
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const double g = schedule[s];
    if (!(g > 0.0)) fail(ErrorKind::Domain, "learning rates must be positive");
    if (s > 0 && g > schedule[s - 1]) {
      fail(ErrorKind::Domain, "learning-rate schedule must be non-increasing");
    }
    total.add(g);
    total_sq.add(g * g);
  }
  const double T = total.value();
  return 2.0 * in.gap / T +
         2.0 * in.A * in.L * staleness_factor(in) * total_sq.value() /
             (static_cast<double>(in.M) * T);
}

ConstantRate theorem3_lr(const BoundInputs& in) {
  check_common(in);
  check_positive(in.gap, "f0 - f*");
  check_positive(in.epsilon, "epsilon");
  if (in.S < 1) fail(ErrorKind::Domain, "S must be >= 1");
  const double M = static_cast<double>(in.M);
  const double gamma =
      in.epsilon * std::sqrt(M * in.gap / (static_cast<double>(in.S) * in.A *
                                           in.L * staleness_factor(in)));
  return {gamma, in.L * gamma <= 1.0};
}

double theorem3_bound(const BoundInputs& in) {
  check_common(in);
  check_positive(in.gap, "f0 - f*");
  check_positive(in.epsilon, "epsilon");
  if (in.S < 1) fail(ErrorKind::Domain, "S must be >= 1");
  const double eps = in.epsilon;
  return ((2.0 + 2.0 * eps * eps) / eps) *
         std::sqrt(in.A * in.L * in.gap * staleness_factor(in) /
                   (static_cast<double>(in.M) * static_cast<double>(in.S)));
}

double estimate_gradient_bound(std::span<const double> grad_norms_sq) {
  double best = 0.0;
  for (double v : grad_norms_sq) best = std::max(best, v);
  return best;
}

double estimate_lipschitz(std::span<const std::vector<double>> params,
                          std::span<const std::vector<double>> grads) {
  if (params.size() != grads.size()) {
    fail(ErrorKind::Dimension, "need one gradient per parameter point");
  }
  double best = 0.0;
  for (std::size_t i = 1; i < params.size(); ++i) {
    const auto& pa = params[i - 1];
    const auto& pb = params[i];
    const auto& ga = grads[i - 1];
    const auto& gb = grads[i];
    if (pa.size() != pb.size() || ga.size() != gb.size()) {
      fail(ErrorKind::Dimension, "trajectory points differ in length");
    }
    double dp = 0.0;
    double dg = 0.0;
    for (std::size_t e = 0; e < pa.size(); ++e) dp += (pa[e] - pb[e]) * (pa[e] - pb[e]);
    for (std::size_t e = 0; e < ga.size(); ++e) dg += (ga[e] - gb[e]) * (ga[e] - gb[e]);
    if (dp == 0.0) continue;
    best = std::max(best, std::sqrt(dg / dp));
  }
  return best;
}

}  // namespace adl
