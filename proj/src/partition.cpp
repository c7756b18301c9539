// SPDX-License-Identifier: Apache-2.0
#include "adl/partition.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "adl/error.hpp"

namespace adl {
namespace {

void check_module_count(std::size_t layers, std::size_t modules) {
  if (modules < 1 || modules > layers) {
    fail(ErrorKind::Config, "split size K=" + std::to_string(modules) +
                                " must lie in [1, " + std::to_string(layers) +
                                "]");
  }
}

double segment_cost(std::span<const double> costs, std::size_t first,
                    std::size_t last) {
  double acc = 0.0;
  for (std::size_t i = first; i < last; ++i) acc += costs[i];
  return acc;
}

}  // namespace

Partition::Partition(std::vector<std::size_t> boundaries)
    : boundaries_(std::move(boundaries)) {
  if (boundaries_.size() < 2 || boundaries_.front() != 1) {
    fail(ErrorKind::Config, "partition must start at layer 1");
  }
  for (std::size_t i = 1; i < boundaries_.size(); ++i) {
    if (boundaries_[i] <= boundaries_[i - 1]) {
      fail(ErrorKind::Config, "partition modules must be non-empty and ordered");
    }
  }
}

std::vector<std::size_t> Partition::q(std::size_t k) const {
  std::vector<std::size_t> out;
  for (std::size_t l = boundaries_.at(k - 1); l < boundaries_.at(k); ++l) {
    out.push_back(l);
  }
  return out;
}

std::size_t Partition::first_offset(std::size_t k) const {
  return boundaries_.at(k - 1) - 1;
}

std::size_t Partition::end_offset(std::size_t k) const {
  return boundaries_.at(k) - 1;
}

std::size_t Partition::module_size(std::size_t k) const {
  return boundaries_.at(k) - boundaries_.at(k - 1);
}

Partition partition_even(std::size_t num_layers, std::size_t modules) {
  check_module_count(num_layers, modules);
  const std::size_t base = num_layers / modules;
  const std::size_t extra = num_layers % modules;
  std::vector<std::size_t> b{1};
  for (std::size_t k = 0; k < modules; ++k) {
    b.push_back(b.back() + base + (k < extra ? 1 : 0));
  }
  return Partition(std::move(b));
}

Partition partition_by_cost(std::span<const double> costs, std::size_t modules) {
  const std::size_t n = costs.size();
  check_module_count(n, modules);
  for (double c : costs) {
    if (!(c >= 0.0)) fail(ErrorKind::Config, "layer costs must be non-negative");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  // best[r][i]: minimal bottleneck for splitting layers i..n-1 into r modules.
  std::vector<std::vector<double>> best(modules + 1,
                                        std::vector<double>(n + 1, inf));
  best[0][n] = 0.0;
  for (std::size_t r = 1; r <= modules; ++r) {
    for (std::size_t i = 0; i + r <= n; ++i) {
      for (std::size_t j = i + 1; j + (r - 1) <= n; ++j) {
        const double rest = best[r - 1][j];
        if (rest == inf) continue;
        best[r][i] = std::min(best[r][i],
                              std::max(segment_cost(costs, i, j), rest));
      }
    }
  }
  const double target = best[modules][0];
  // Walk left to right taking the shortest feasible module each time.
  std::vector<std::size_t> b{1};
  std::size_t start = 0;
  for (std::size_t r = modules; r >= 1; --r) {
    std::size_t chosen = n;
    for (std::size_t j = start + 1; j + (r - 1) <= n; ++j) {
      if (segment_cost(costs, start, j) <= target && best[r - 1][j] <= target) {
        chosen = j;
        break;
      }
    }
    b.push_back(chosen + 1);
    start = chosen;
  }
  return Partition(std::move(b));
}

double bottleneck(const Partition& partition, std::span<const double> costs) {
  if (partition.layers() != costs.size()) {
    fail(ErrorKind::Dimension, "cost list length does not match partition");
  }
  double worst = 0.0;
  for (std::size_t k = 1; k <= partition.modules(); ++k) {
    worst = std::max(worst, segment_cost(costs, partition.first_offset(k),
                                         partition.end_offset(k)));
  }
  return worst;
}

}  // namespace adl
