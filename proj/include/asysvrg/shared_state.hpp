#pragma once

// The shared iterate u and the three read/write contracts workers use on it.
//
//  ConsistentLock   : one mutex guards reads and writes; snapshots are coherent.
//  InconsistentLock : writes take the mutex; reads copy element by element.
//  LockFree         : relaxed element-atomic loads and fetch_adds, no mutex.
//
// Every element access is a std::atomic<double> operation, so no single
// element is ever torn; only whole-vector coherence differs between schemes.

#include <atomic>
#include <cstdint>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "asysvrg/model.hpp"

namespace asysvrg {

enum class Scheme { ConsistentLock, InconsistentLock, LockFree };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::ConsistentLock: return "consistent";
    case Scheme::InconsistentLock: return "inconsistent";
    case Scheme::LockFree: return "lockfree";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "consistent" || s == "consistent-lock") return Scheme::ConsistentLock;
  if (s == "inconsistent" || s == "inconsistent-lock" || s == "lock") return Scheme::InconsistentLock;
  if (s == "lockfree" || s == "lock-free" || s == "unlock") return Scheme::LockFree;
  throw std::invalid_argument("unknown scheme '" + std::string(s) + "'");
}

class SharedState {
 public:
  explicit SharedState(std::size_t dim) : u_(dim), running_sum_(dim) {}

  SharedState(const SharedState&) = delete;
  SharedState& operator=(const SharedState&) = delete;

  std::size_t dim() const noexcept { return u_.size(); }

  /// Resets u to `w`, the update counter to zero and clears the running sum.
  /// Callers must ensure no worker is active.
  void reset(std::span<const double> w) {
    detail::require_dim(w.size(), u_.size(), "SharedState::reset");
    for (std::size_t j = 0; j < u_.size(); ++j) {
      u_[j].store(w[j], std::memory_order_relaxed);
      running_sum_[j] = 0.0;
    }
    counter_.store(0, std::memory_order_release);
  }

  /// Quiescent copy of u.
  ParamVector snapshot() const {
    ParamVector out(u_.size());
    for (std::size_t j = 0; j < u_.size(); ++j) out[j] = u_[j].load(std::memory_order_acquire);
    return out;
  }

  std::uint64_t updates() const noexcept { return counter_.load(std::memory_order_acquire); }

  /// Sum of every pre-update iterate recorded by locked writes.
  const ParamVector& running_sum() const noexcept { return running_sum_; }

  /// Copies u into `out` under the scheme's read contract and returns the
  /// read stamp: the update count observed before the copy started.
  std::uint64_t read(Scheme scheme, std::span<double> out) const {
    if (scheme == Scheme::ConsistentLock) {
      std::lock_guard lock(mutex_);
      for (std::size_t j = 0; j < u_.size(); ++j) out[j] = u_[j].load(std::memory_order_relaxed);
      return counter_.load(std::memory_order_relaxed);
    }
    const std::uint64_t stamp = counter_.load(std::memory_order_acquire);
    for (std::size_t j = 0; j < u_.size(); ++j) out[j] = u_[j].load(std::memory_order_relaxed);
    return stamp;
  }

  /// u <- u + scale * dir under the scheme's write contract; returns the index
  /// m of this update. When `sum` is non-empty each element's pre-update value
  /// is added to it: locked schemes pass running_sum (guarded by the mutex),
  /// lock-free callers pass a worker-local buffer.
  std::uint64_t write(Scheme scheme, std::span<const double> dir, double scale, bool track_sum,
                      std::span<double> local_sum = {}) {
    if (scheme == Scheme::LockFree) {
      for (std::size_t j = 0; j < u_.size(); ++j) {
        const double old = u_[j].fetch_add(scale * dir[j], std::memory_order_relaxed);
        if (track_sum) local_sum[j] += old;
      }
      return counter_.fetch_add(1, std::memory_order_acq_rel);
    }
    std::lock_guard lock(mutex_);
    for (std::size_t j = 0; j < u_.size(); ++j) {
      const double old = u_[j].load(std::memory_order_relaxed);
      if (track_sum) running_sum_[j] += old;
      u_[j].store(old + scale * dir[j], std::memory_order_relaxed);
    }
    return counter_.fetch_add(1, std::memory_order_acq_rel);
  }

 private:
  std::vector<std::atomic<double>> u_;
  ParamVector running_sum_;
  std::atomic<std::uint64_t> counter_{0};
  mutable std::mutex mutex_;
};

}  // namespace asysvrg
