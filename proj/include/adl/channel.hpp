// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

#include "adl/error.hpp"

namespace adl {

/// Blocking FIFO with a fixed capacity. close() wakes every waiter; after
/// that push() refuses and pop() drains nothing further.
template <class T>
class BoundedQueue {
 public:
  BoundedQueue(std::size_t capacity, std::chrono::milliseconds timeout)
      : capacity_(capacity), timeout_(timeout) {}

  BoundedQueue(const BoundedQueue&) = delete;
  BoundedQueue& operator=(const BoundedQueue&) = delete;

  /// Returns false if the queue was closed. Throws Protocol on timeout.
  bool push(T value) {
    std::unique_lock lock(mu_);
    if (!not_full_.wait_for(lock, timeout_, [&] {
          return closed_ || items_.size() < capacity_;
        })) {
      fail(ErrorKind::Protocol, "queue push timed out (deadlock?)");
    }
    if (closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  /// Empty optional once closed. Throws Protocol on timeout.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    if (!not_empty_.wait_for(lock, timeout_,
                             [&] { return closed_ || !items_.empty(); })) {
      fail(ErrorKind::Protocol, "queue pop timed out (deadlock?)");
    }
    if (closed_) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return value;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  std::size_t capacity_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

}  // namespace adl
