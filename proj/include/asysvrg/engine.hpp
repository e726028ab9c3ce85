#pragma once

// Asynchronous SVRG over p worker threads sharing one iterate.
//
// Each outer epoch: the workers compute the full gradient at the snapshot
// w_t over disjoint contiguous blocks of instances, then each runs M inner
// steps  i ~ U{0..n-1},  u_hat <- read(u),  v = grad f_i(u_hat) - grad f_i(u0) + g0,
// u <- u - eta v.  The next snapshot is the final u (CurrentIterate) or the
// mean of the M~ iterates the updates were applied to (AverageIterate).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "asysvrg/metrics.hpp"
#include "asysvrg/model.hpp"
#include "asysvrg/rng.hpp"
#include "asysvrg/shared_state.hpp"

namespace asysvrg {

enum class IterateOption { CurrentIterate, AverageIterate };

struct SolverConfig {
  Scheme scheme = Scheme::LockFree;
  double step = 0.1;
  std::size_t inner_iters = 1;  // M, per worker
  unsigned workers = 1;         // p
  IterateOption option = IterateOption::CurrentIterate;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double lambda = 1e-4;
  bool record_trace = false;

  /// Zero step size is accepted as a degenerate no-op run.
  void validate() const {
    if (!(step >= 0.0) || !std::isfinite(step)) throw std::invalid_argument("step size must be finite and >= 0");
    if (inner_iters < 1) throw std::invalid_argument("inner iterations M must be >= 1");
    if (workers < 1) throw std::invalid_argument("worker count p must be >= 1");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  }
};

/// M = 2n/p, the per-worker inner count of the reference protocol.
inline std::size_t default_inner_iters(std::size_t n, unsigned workers) {
  return std::max<std::size_t>(1, 2 * n / std::max(1U, workers));
}

/// One applied update: its index m, the stamp of the read it used, and who did it.
struct DelayRecord {
  std::uint64_t m = 0;
  std::uint64_t read_stamp = 0;
  unsigned worker = 0;
  std::uint64_t delay() const noexcept { return m - read_stamp; }
};

struct DelayTrace {
  std::vector<DelayRecord> records;
  std::uint64_t max_delay = 0;
};

struct EpochResult {
  ParamVector next;
  std::uint64_t updates = 0;
  std::uint64_t max_delay = 0;
  double wall_seconds = 0.0;
  DelayTrace trace;
};

/// Contiguous, balanced split of {0..n-1} into p blocks.
inline std::vector<std::vector<std::size_t>> block_partition(std::size_t n, unsigned p) {
  std::vector<std::vector<std::size_t>> blocks(p);
  for (unsigned a = 0; a < p; ++a) {
    const std::size_t lo = n * a / p, hi = n * (a + 1) / p;
    for (std::size_t i = lo; i < hi; ++i) blocks[a].push_back(i);
  }
  return blocks;
}

namespace detail {

/// Runs fn(worker) on p threads (inline when p == 1). The first exception is
/// rethrown after all threads join, tagged with the worker id.
inline void run_workers(unsigned p, const std::function<void(unsigned)>& fn, std::atomic<bool>& abort,
                        const std::string& what) {
  std::vector<std::exception_ptr> errors(p);
  auto guarded = [&](unsigned w) {
    try {
      fn(w);
    } catch (...) {
      errors[w] = std::current_exception();
      abort.store(true, std::memory_order_relaxed);
    }
  };
  if (p == 1) {
    guarded(0);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(p);
    for (unsigned w = 0; w < p; ++w) threads.emplace_back(guarded, w);
  }
  for (unsigned w = 0; w < p; ++w) {
    if (!errors[w]) continue;
    try {
      std::rethrow_exception(errors[w]);
    } catch (const std::exception& e) {
      throw std::runtime_error(what + ": worker " + std::to_string(w) + " failed: " + e.what());
    }
  }
}

}  // namespace detail

/// Full gradient with one block per worker, computed in parallel and merged
/// in block order. With p == 1 this matches full_gradient() bit for bit.
inline ParamVector parallel_full_gradient(const Dataset& data, std::span<const double> w, double lambda, unsigned p,
                                          std::span<double> derivatives) {
  const auto blocks = block_partition(data.size(), p);
  std::vector<ParamVector> partial(p, ParamVector(data.dim(), 0.0));
  std::atomic<bool> abort{false};
  detail::run_workers(
      p, [&](unsigned a) { accumulate_loss_gradient(data, w, blocks[a], partial[a], derivatives); }, abort,
      "full gradient");
  ParamVector total(data.dim(), 0.0);
  for (const auto& part : partial)
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += part[j];
  return finish_full_gradient(data, w, lambda, std::move(total));
}

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, double objective, double initial)
      : std::runtime_error("diverged at epoch " + std::to_string(epoch) + ": objective " +
                           detail::format_real(objective) + " exceeds 1e3 x initial " + detail::format_real(initial)),
        epoch_(epoch),
        objective_(objective) {}
  std::size_t epoch() const noexcept { return epoch_; }
  double objective() const noexcept { return objective_; }

  /// Rows recorded up to and including the diverging epoch, when known.
  const std::vector<EpochRow>& rows() const noexcept { return rows_; }
  void set_rows(std::vector<EpochRow> rows) { rows_ = std::move(rows); }

 private:
  std::size_t epoch_;
  double objective_;
  std::vector<EpochRow> rows_;
};

class AsySvrgEngine {
 public:
  AsySvrgEngine(const Dataset& data, SolverConfig cfg, ParamVector w0)
      : data_(data), cfg_(cfg), w_(std::move(w0)), shared_(data.dim()) {
    cfg_.validate();
    detail::require_dim(w_.size(), data_.dim(), "AsySvrgEngine w0");
  }

  const ParamVector& iterate() const noexcept { return w_; }
  std::size_t epoch() const noexcept { return epoch_; }
  const SolverConfig& config() const noexcept { return cfg_; }

  /// One outer iteration; advances the snapshot to w_{t+1}.
  EpochResult run_epoch() {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t d = data_.dim();
    const unsigned p = cfg_.workers;
    const bool averaging = cfg_.option == IterateOption::AverageIterate;
    const bool lock_free = cfg_.scheme == Scheme::LockFree;

    std::vector<double> deriv0(data_.size());
    const ParamVector g0 = parallel_full_gradient(data_, w_, cfg_.lambda, p, deriv0);
    const ParamVector& u0 = w_;
    shared_.reset(u0);

    std::vector<ParamVector> local_sums(lock_free && averaging ? p : 0, ParamVector(d, 0.0));
    std::vector<std::vector<DelayRecord>> traces(p);
    std::vector<std::uint64_t> max_delay(p, 0);
    std::atomic<bool> abort{false}, diverged{false};

    auto worker = [&](unsigned wid) {
      Rng rng = worker_stream(cfg_.seed, wid, epoch_);
      IndexSampler sample(data_.size());
      ParamVector u_hat(d), v(d);
      std::span<double> local = lock_free && averaging ? std::span<double>(local_sums[wid]) : std::span<double>();
      if (cfg_.record_trace) traces[wid].reserve(cfg_.inner_iters);
      for (std::size_t s = 0; s < cfg_.inner_iters; ++s) {
        if (abort.load(std::memory_order_relaxed)) return;
        const std::size_t i = sample(rng);
        const std::uint64_t stamp = shared_.read(cfg_.scheme, u_hat);
        vr_update_into(data_[i], u_hat, u0, deriv0[i], g0, cfg_.lambda, v);
        if (!all_finite(v)) {
          diverged.store(true, std::memory_order_relaxed);
          abort.store(true, std::memory_order_relaxed);
          return;
        }
        const std::uint64_t m = shared_.write(cfg_.scheme, v, -cfg_.step, averaging, local);
        max_delay[wid] = std::max(max_delay[wid], m - stamp);
        if (cfg_.record_trace) traces[wid].push_back({m, stamp, wid});
      }
    };
    detail::run_workers(p, worker, abort, "epoch " + std::to_string(epoch_));

    EpochResult out;
    out.updates = shared_.updates();
    if (averaging) {
      ParamVector sum(d, 0.0);
      if (lock_free) {
        for (const auto& part : local_sums)
          for (std::size_t j = 0; j < d; ++j) sum[j] += part[j];
      } else {
        sum = shared_.running_sum();
      }
      const double count = static_cast<double>(out.updates);
      for (auto& x : sum) x /= count;
      out.next = std::move(sum);
    } else {
      out.next = shared_.snapshot();
    }
    for (unsigned w = 0; w < p; ++w) {
      out.max_delay = std::max(out.max_delay, max_delay[w]);
      if (cfg_.record_trace)
        out.trace.records.insert(out.trace.records.end(), traces[w].begin(), traces[w].end());
    }
    out.trace.max_delay = out.max_delay;
    std::sort(out.trace.records.begin(), out.trace.records.end(),
              [](const DelayRecord& a, const DelayRecord& b) { return a.m < b.m; });
    if (diverged.load() || !all_finite(out.next))
      throw DivergenceError(epoch_ + 1, std::numeric_limits<double>::infinity(), objective(data_, w_, cfg_.lambda));

    w_ = out.next;
    ++epoch_;
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

 private:
  const Dataset& data_;
  SolverConfig cfg_;
  ParamVector w_;
  SharedState shared_;
  std::size_t epoch_ = 0;
};

/// Stopping and bookkeeping for a multi-epoch run.
struct RunOptions {
  std::optional<double> f_star;  // gap column is objective - f_star (NaN when absent)
  std::optional<double> tol;     // stop once gap < tol; unset never stops early
  double divergence_factor = 1e3;
};

struct RunResult {
  ParamVector w;
  double initial_objective = 0.0;
  std::vector<EpochRow> rows;
  bool converged = false;
  double seconds_to_tol = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/// Drives step(epoch) -> (updates, max_delay, seconds) and evaluates the
/// objective after each epoch. Evaluation time is excluded from wall time.
template <typename Step, typename Current>
RunResult drive(const Dataset& data, double lambda, const ParamVector& w0, std::size_t epochs, double passes_per_epoch,
                const RunOptions& opts, Step&& step, Current&& current) {
  RunResult res;
  res.initial_objective = objective(data, w0, lambda);
  const double initial_positive = std::max(res.initial_objective, std::numeric_limits<double>::min());
  double wall = 0.0, passes = 0.0;
  std::uint64_t updates = 0;
  for (std::size_t t = 1; t <= epochs; ++t) {
    auto diverged = [&](double f) {
      DivergenceError err(t, f, res.initial_objective);
      const double gap = opts.f_star ? f - *opts.f_star : std::numeric_limits<double>::quiet_NaN();
      res.rows.push_back({t, passes + passes_per_epoch, f, gap, wall, updates, 0});
      err.set_rows(std::move(res.rows));
      return err;
    };
    std::uint64_t epoch_updates = 0, epoch_delay = 0;
    double seconds = 0.0;
    try {
      std::tie(epoch_updates, epoch_delay, seconds) = step(t - 1);
    } catch (const DivergenceError& e) {
      throw diverged(e.objective());
    }
    wall += seconds;
    passes += passes_per_epoch;
    updates += epoch_updates;
    const ParamVector& w = current();
    double f = std::numeric_limits<double>::infinity();
    if (all_finite(w)) {
      try {
        f = objective(data, w, lambda);
      } catch (const std::runtime_error&) {
      }
    }
    if (!std::isfinite(f) || f > opts.divergence_factor * initial_positive) {
      passes -= passes_per_epoch;
      throw diverged(f);
    }
    const double gap = opts.f_star ? f - *opts.f_star : std::numeric_limits<double>::quiet_NaN();
    res.rows.push_back({t, passes, f, gap, wall, updates, epoch_delay});
    if (opts.f_star && opts.tol && gap < *opts.tol) {
      res.converged = true;
      res.seconds_to_tol = wall;
      break;
    }
  }
  res.w = current();
  return res;
}

}  // namespace detail

/// Effective passes per AsySVRG epoch: one for the full gradient plus
/// p*M/n for the inner loop (exactly 3 when M = 2n/p).
inline double asysvrg_passes_per_epoch(std::size_t n, const SolverConfig& cfg) {
  return 1.0 + static_cast<double>(cfg.workers) * static_cast<double>(cfg.inner_iters) / static_cast<double>(n);
}

inline RunResult solve_asysvrg(const Dataset& data, const SolverConfig& cfg, const ParamVector& w0,
                               const RunOptions& opts = {}) {
  AsySvrgEngine engine(data, cfg, w0);
  return detail::drive(
      data, cfg.lambda, w0, cfg.epochs, asysvrg_passes_per_epoch(data.size(), cfg), opts,
      [&](std::size_t) {
        const auto r = engine.run_epoch();
        return std::tuple{r.updates, r.max_delay, r.wall_seconds};
      },
      [&]() -> const ParamVector& { return engine.iterate(); });
}

}  // namespace asysvrg
