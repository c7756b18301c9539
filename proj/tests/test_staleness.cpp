// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <adl/error.hpp>
#include <adl/optimizer.hpp>
#include <adl/staleness.hpp>

#include <cmath>
#include <vector>

using namespace adl;

TEST_SUITE("staleness") {

TEST_CASE("level_of_staleness examples and domain") {
  CHECK(level_of_staleness(7, 3, 2) == 1);
  CHECK(level_of_staleness(5, 0, 4) == 0);
  CHECK(level_of_staleness(10, 10, 1) == 10);
  CHECK_THROWS_AS(level_of_staleness(3, 4, 1), Error);
  CHECK_THROWS_AS(level_of_staleness(3, -1, 1), Error);
  CHECK_THROWS_AS(level_of_staleness(3, 1, 0), Error);
}

TEST_CASE("floor_div rounds toward negative infinity") {
  CHECK(floor_div(7, 2) == 3);
  CHECK(floor_div(-1, 4) == -1);
  CHECK(floor_div(-4, 4) == -1);
  CHECK(floor_div(-5, 4) == -2);
  CHECK(floor_div(0, 3) == 0);
}

TEST_CASE("module_staleness examples") {
  CHECK(module_staleness(1, 0, 3, 2, 4) == 1);
  CHECK(module_staleness(1, 1, 3, 2, 4) == 1);
  CHECK(module_staleness(1, 2, 3, 2, 4) == 0);
  CHECK(module_staleness(1, 3, 3, 2, 4) == 0);
  for (std::int64_t K = 1; K <= 6; ++K) {
    for (std::int64_t M = 1; M <= 5; ++M) {
      for (std::int64_t s = 1; s <= 6; ++s) {
        for (std::int64_t j = 0; j < M; ++j) CHECK(module_staleness(s, j, K, K, M) == 0);
      }
    }
  }
  for (std::int64_t s = 14; s <= 30; ++s) CHECK(module_staleness(s, 0, 8, 1, 1) == 14);
  CHECK_THROWS_AS(module_staleness(0, 4, 3, 2, 4), Error);
  CHECK_THROWS_AS(module_staleness(0, 0, 3, 4, 4), Error);
  CHECK_THROWS_AS(module_staleness(-1, 0, 3, 1, 4), Error);
}

TEST_CASE("slot batch index") {
  CHECK(slot_batch_index(1, 0, 3, 2, 4) == 2);
  CHECK(slot_batch_index(0, 0, 3, 1, 1) == -4);
}

TEST_CASE("effective_version examples") {
  CHECK(effective_version(0, 0, 4, 1, 1) == 0);
  CHECK(effective_version(0, 0, 8, 1, 3) == 0);
  // K=2, k=1, M=1 gives d = 2, so s = 5 reads version 3.
  CHECK(module_staleness(5, 0, 2, 1, 1) == 2);
  CHECK(effective_version(5, 0, 2, 1, 1) == 3);
}

TEST_CASE("staleness range and steady state") {
  for (std::int64_t K = 1; K <= 10; ++K) {
    for (std::int64_t k = 1; k <= K; ++k) {
      for (std::int64_t M = 1; M <= 8; ++M) {
        for (std::int64_t j = 0; j < M; ++j) {
          const std::int64_t ss = steady_state_staleness(j, K, k, M);
          CHECK(ss >= 0);
          CHECK(ss <= 2 * (K - k));
          if (M == 1) CHECK(ss == 2 * (K - k));
          for (std::int64_t s = 0; s <= 30; ++s) {
            const std::int64_t d = module_staleness(s, j, K, k, M);
            CHECK(std::max<std::int64_t>(0, d) >= 0);
            const std::int64_t v = effective_version(s, j, K, k, M);
            CHECK(v == std::max<std::int64_t>(0, s - d));
            CHECK(v <= s);
            // Past pipeline fill the closed form applies.
            if (M * s + j - 2 * (K - k) >= 0) CHECK(d == ss);
          }
        }
      }
    }
  }
}

TEST_CASE("averaged_los examples and invariants") {
  CHECK(averaged_los(3, 2, 4) == Rational::make(1, 2));
  CHECK(averaged_los(8, 1, 1) == Rational::make(14, 1));
  CHECK(averaged_los(8, 1, 4) == Rational::make(7, 2));
  CHECK(averaged_los(8, 1, 4).str() == "7/2");
  CHECK(Rational::make(6, -4) == Rational::make(-3, 2));

  for (std::int64_t K = 1; K <= 10; ++K) {
    for (std::int64_t k = 1; k <= K; ++k) {
      for (std::int64_t M = 1; M <= 8; ++M) {
        // Brute-force average of module_staleness over one group far from fill.
        const std::int64_t s = 100;
        std::int64_t sum = 0;
        for (std::int64_t j = 0; j < M; ++j) sum += module_staleness(s, j, K, k, M);
        CHECK(averaged_los(K, k, M) == Rational::make(sum, M));
        if (M > 1) CHECK(averaged_los(K, k, M) <= averaged_los(K, k, M - 1));
      }
      CHECK(averaged_los(K, K, 1 + k % 5) == Rational::make(0, 1));
    }
  }
  Rational total;
  for (std::int64_t k = 1; k <= 3; ++k) total = total + averaged_los(3, k, 4);
  CHECK(total_averaged_los(3, 4) == total);
  CHECK(total_averaged_los(3, 4) == Rational::make(3, 2));
}

TEST_CASE("theorem1_rhs") {
  BoundInputs in;
  in.gamma = 0.1;
  in.grad_norm_sq = 4.0;
  in.A = 1.0;
  in.L = 1.0;
  in.M = 2;
  in.sum_dbar = 3.0;
  CHECK(theorem1_rhs(in) == doctest::Approx(-0.1875).epsilon(1e-15));

  BoundInputs zero = in;
  zero.gamma = 0.0;
  zero.grad_norm_sq = 0.0;
  CHECK(theorem1_rhs(zero) == 0.0);

  // Larger M with fixed staleness sum shrinks the positive term.
  double prev = 1e300;
  for (std::int64_t M = 1; M <= 16; ++M) {
    BoundInputs b = in;
    b.grad_norm_sq = 0.0;
    b.M = M;
    const double v = theorem1_rhs(b);
    CHECK(v < prev);
    prev = v;
  }

  BoundInputs bad = in;
  bad.gamma = 2.0;
  CHECK_THROWS_AS(theorem1_rhs(bad), Error);
}

TEST_CASE("theorem2_rhs") {
  BoundInputs in;
  in.A = 1.0;
  in.L = 1.0;
  in.M = 1;
  in.sum_dbar = 0.0;
  in.gap = 1.0;
  const std::vector<double> constant(10, 0.1);
  CHECK(theorem2_rhs(in, constant) == doctest::Approx(2.2).epsilon(1e-14));

  CHECK_THROWS_AS(theorem2_rhs(in, std::vector<double>{}), Error);
  CHECK_THROWS_AS(theorem2_rhs(in, std::vector<double>{0.1, 0.2}), Error);
  CHECK_THROWS_AS(theorem2_rhs(in, std::vector<double>{1.5, 0.1}), Error);

  // Doubling M strictly decreases the second term; with gap 0 only it remains.
  BoundInputs g0 = in;
  g0.gap = 0.0;
  g0.sum_dbar = 2.0;
  double prev = 1e300;
  for (std::int64_t M : {1, 2, 4, 8}) {
    g0.M = M;
    const double v = theorem2_rhs(g0, constant);
    CHECK(v < prev);
    prev = v;
  }

  // Harmonic schedule: decreasing in S from early on, tending to 0.
  std::vector<double> harmonic;
  double last = 1e300;
  int checks = 0;
  for (std::int64_t S = 1; S <= 1000000; S *= 10) {
    while (static_cast<std::int64_t>(harmonic.size()) < S) {
      harmonic.push_back(lr_at(Harmonic{1.0}, static_cast<std::int64_t>(harmonic.size()), 0.0));
    }
    const double v = theorem2_rhs(in, harmonic);
    if (S >= 10) CHECK(v < last);
    last = v;
    ++checks;
  }
  CHECK(checks == 7);
  CHECK(last < 0.4);
}

TEST_CASE("theorem3 learning rate and bound") {
  BoundInputs in;
  in.epsilon = 1.0;
  in.M = 1;
  in.gap = 1.0;
  in.S = 4;
  in.A = 1.0;
  in.L = 1.0;
  in.sum_dbar = 0.0;
  const ConstantRate r = theorem3_lr(in);
  CHECK(r.gamma == 0.5);
  CHECK(r.admissible);
  CHECK(theorem3_bound(in) == 2.0);

  BoundInputs s4 = in;
  s4.S = 16;
  CHECK(theorem3_lr(s4).gamma == 0.25);
  CHECK(theorem3_bound(s4) == 1.0);

  BoundInputs stale = in;
  stale.sum_dbar = 1e12;
  CHECK(theorem3_lr(stale).gamma < 1e-5);

  // (2 + 2 eps^2) / eps is smallest at eps = 1.
  for (double eps : {0.25, 0.5, 0.9, 1.1, 2.0, 4.0}) {
    BoundInputs e = in;
    e.epsilon = eps;
    CHECK(theorem3_bound(e) > theorem3_bound(in));
  }

  BoundInputs big = in;
  big.S = 1;
  big.epsilon = 3.0;
  const ConstantRate inadmissible = theorem3_lr(big);
  CHECK(inadmissible.gamma == 3.0);
  CHECK_FALSE(inadmissible.admissible);

  BoundInputs bad = in;
  bad.A = 0.0;
  CHECK_THROWS_AS(theorem3_lr(bad), Error);
  bad = in;
  bad.S = 0;
  CHECK_THROWS_AS(theorem3_bound(bad), Error);
}

TEST_CASE("empirical estimators") {
  CHECK(estimate_gradient_bound(std::vector<double>{1.0, 3.0, 2.0}) == 3.0);
  // f = x^2 has gradient 2x, so every secant ratio is exactly 2.
  const std::vector<std::vector<double>> params{{1.0}, {0.5}, {0.5}, {-0.25}};
  const std::vector<std::vector<double>> grads{{2.0}, {1.0}, {1.0}, {-0.5}};
  CHECK(estimate_lipschitz(params, grads) == 2.0);
}

}  // TEST_SUITE
