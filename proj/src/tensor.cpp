// SPDX-License-Identifier: Apache-2.0
#include "adl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "adl/error.hpp"

namespace adl {
namespace {

// No rank-0 scalars: an empty shape means an empty tensor.
std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    fail(ErrorKind::Dimension, "tensor data length " +
                                   std::to_string(data_.size()) +
                                   " does not match shape " +
                                   shape_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() == 2) return shape_[0];
  fail(ErrorKind::Dimension, "expected rank 1 or 2, got " + shape_string(shape_));
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) fail(ErrorKind::Dimension, "scalar tensor has no columns");
  return shape_.back();
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::squared_norm() const noexcept {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return acc;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace adl
