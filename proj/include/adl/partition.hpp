// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace adl {

/// Depth-wise split of L layers into K contiguous, non-empty modules.
///
/// Modules are numbered 1..K and layers 1..L. `boundaries` has K+1 entries
/// m_1 < ... < m_{K+1} with m_1 = 1 and m_{K+1} = L+1, so module k owns
/// layers m_k .. m_{k+1}-1.
class Partition {
 public:
  Partition() = default;
  /// Throws Config unless the boundaries describe a valid split.
  explicit Partition(std::vector<std::size_t> boundaries);

  std::size_t modules() const noexcept { return boundaries_.size() - 1; }
  std::size_t layers() const noexcept { return boundaries_.back() - 1; }
  const std::vector<std::size_t>& boundaries() const noexcept {
    return boundaries_;
  }

  /// 1-based layer indices of module k.
  std::vector<std::size_t> q(std::size_t k) const;
  /// Zero-based [first, last) layer offsets of module k, for indexing arrays.
  std::size_t first_offset(std::size_t k) const;
  std::size_t end_offset(std::size_t k) const;
  std::size_t module_size(std::size_t k) const;

  bool operator==(const Partition&) const = default;

 private:
  std::vector<std::size_t> boundaries_{1, 1};
};

/// Sizes differ by at most one; earlier modules take the remainder.
Partition partition_even(std::size_t num_layers, std::size_t modules);

/// Contiguous split minimising the largest per-module cost sum. Among
/// optimal splits the lexicographically smallest boundary list wins.
Partition partition_by_cost(std::span<const double> costs, std::size_t modules);

/// Largest per-module cost sum of a partition, each sum taken left to right.
double bottleneck(const Partition& partition, std::span<const double> costs);

}  // namespace adl
