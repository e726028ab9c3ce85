#pragma once

// Reference solvers: single-threaded SVRG (the zero-delay oracle for the
// asynchronous engine and the simulator) and Hogwild!-style parallel SGD.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "asysvrg/engine.hpp"
#include "asysvrg/model.hpp"
#include "asysvrg/rng.hpp"
#include "asysvrg/shared_state.hpp"

namespace asysvrg {

struct SvrgTrajectory {
  std::vector<ParamVector> snapshots;  // w_0 .. w_T
  std::vector<double> objectives;      // f(w_0) .. f(w_T)
};

/// Plain single-worker SVRG with k(m) = m. Samples come from
/// worker_stream(seed, 0, t), the same stream worker 0 of the engine uses.
inline SvrgTrajectory svrg_sequential(const Dataset& data, const ParamVector& w0, double step, std::size_t inner_iters,
                                      std::size_t epochs, std::uint64_t seed, double lambda,
                                      IterateOption option = IterateOption::CurrentIterate) {
  detail::require_dim(w0.size(), data.dim(), "svrg_sequential w0");
  const std::size_t d = data.dim();
  SvrgTrajectory traj;
  traj.snapshots.push_back(w0);
  traj.objectives.push_back(objective(data, w0, lambda));
  const double limit = 1e3 * std::max(traj.objectives.front(), std::numeric_limits<double>::min());

  ParamVector w = w0, u(d), v(d), sum(d);
  std::vector<double> deriv0(data.size());
  IndexSampler sample(data.size());
  for (std::size_t t = 0; t < epochs; ++t) {
    const ParamVector g0 = full_gradient(data, w, lambda, nullptr, deriv0);
    u = w;
    std::fill(sum.begin(), sum.end(), 0.0);
    Rng rng = worker_stream(seed, 0, t);
    for (std::size_t s = 0; s < inner_iters; ++s) {
      const std::size_t i = sample(rng);
      vr_update_into(data[i], u, w, deriv0[i], g0, lambda, v);
      for (std::size_t j = 0; j < d; ++j) {
        if (option == IterateOption::AverageIterate) sum[j] += u[j];
        u[j] -= step * v[j];
      }
    }
    if (inner_iters > 0) {
      if (option == IterateOption::AverageIterate) {
        for (std::size_t j = 0; j < d; ++j) w[j] = sum[j] / static_cast<double>(inner_iters);
      } else {
        w = u;
      }
    }
    double f = std::numeric_limits<double>::infinity();
    if (all_finite(w)) f = objective(data, w, lambda);
    if (!std::isfinite(f) || f > limit) throw DivergenceError(t + 1, f, traj.objectives.front());
    traj.snapshots.push_back(w);
    traj.objectives.push_back(f);
  }
  return traj;
}

/// High-precision minimizer used for suboptimality gaps.
struct ReferenceOptimum {
  ParamVector w;
  double f = 0.0;
  double grad_norm = 0.0;
  std::size_t epochs = 0;
};

/// Sequential SVRG (eta = 1/(4L), M = 2n) until the strong-convexity bound
/// ||grad f||^2 / (2 mu) on the gap is below `gap_tol` and the gradient norm
/// below `grad_tol`, or until the gradient norm stops improving for 10 epochs.
inline ReferenceOptimum reference_optimum(const Dataset& data, double lambda, double gap_tol = 1e-14,
                                          double grad_tol = 1e-10, std::size_t max_epochs = 1000,
                                          std::uint64_t seed = 12345) {
  const double mu = strong_convexity_constant(lambda);
  const double L = smoothness_constant(data, lambda);
  const double step = 0.25 / L;
  const std::size_t d = data.dim(), n = data.size();
  ParamVector w(d, 0.0), u(d), v(d);
  std::vector<double> deriv0(n);
  IndexSampler sample(n);
  ReferenceOptimum ref;
  double best_bound = std::numeric_limits<double>::infinity();
  ParamVector best_w = w;
  for (std::size_t t = 0; t <= max_epochs; ++t) {
    const ParamVector g0 = full_gradient(data, w, lambda, nullptr, deriv0);
    const double gn2 = squared_norm(g0);
    if (gn2 < best_bound) {
      best_bound = gn2;
      best_w = w;
      ref.epochs = t;
    }
    const bool done = gn2 / (2.0 * mu) <= gap_tol && gn2 <= grad_tol * grad_tol;
    if (done || t == max_epochs || t >= ref.epochs + 10) break;
    u = w;
    Rng rng = worker_stream(seed, 0, t);
    for (std::size_t s = 0; s < 2 * n; ++s) {
      const std::size_t i = sample(rng);
      vr_update_into(data[i], u, w, deriv0[i], g0, lambda, v);
      for (std::size_t j = 0; j < d; ++j) u[j] -= step * v[j];
    }
    w = u;
  }
  ref.w = best_w;
  ref.f = objective(data, best_w, lambda);
  ref.grad_norm = std::sqrt(best_bound);
  return ref;
}

struct HogwildConfig {
  double step = 0.1;    // initial gamma
  double decay = 0.9;   // gamma <- decay * gamma after every epoch
  unsigned workers = 1;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double lambda = 1e-4;
  std::size_t iters_per_worker = 0;  // 0 means n / p

  void validate() const {
    if (!(step >= 0.0) || !std::isfinite(step)) throw std::invalid_argument("hogwild: step must be finite and >= 0");
    if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("hogwild: decay must lie in (0, 1]");
    if (workers < 1) throw std::invalid_argument("hogwild: worker count must be >= 1");
  }
};

inline std::size_t hogwild_iters(std::size_t n, const HogwildConfig& cfg) {
  return cfg.iters_per_worker > 0 ? cfg.iters_per_worker : std::max<std::size_t>(1, n / cfg.workers);
}

/// Parallel SGD: every worker repeats  i ~ U, w_hat <- read(w),
/// w <- w - gamma grad f_i(w_hat). `lock` serializes the writes
/// (reads stay uncoordinated); otherwise writes are element-atomic adds.
inline RunResult hogwild_run(const Dataset& data, const HogwildConfig& cfg, bool lock, const ParamVector& w0,
                             const RunOptions& opts = {}) {
  cfg.validate();
  detail::require_dim(w0.size(), data.dim(), "hogwild_run w0");
  const Scheme scheme = lock ? Scheme::InconsistentLock : Scheme::LockFree;
  const std::size_t d = data.dim();
  const std::size_t iters = hogwild_iters(data.size(), cfg);
  SharedState shared(d);
  shared.reset(w0);
  ParamVector current = w0;
  double gamma = cfg.step;
  const double passes = static_cast<double>(cfg.workers * iters) / static_cast<double>(data.size());

  auto epoch_step = [&](std::size_t t) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t before = shared.updates();
    std::vector<std::uint64_t> max_delay(cfg.workers, 0);
    std::atomic<bool> abort{false};
    detail::run_workers(
        cfg.workers,
        [&](unsigned wid) {
          Rng rng = worker_stream(cfg.seed, wid, t);
          IndexSampler sample(data.size());
          ParamVector w_hat(d), g(d);
          for (std::size_t s = 0; s < iters; ++s) {
            if (abort.load(std::memory_order_relaxed)) return;
            const std::size_t i = sample(rng);
            const std::uint64_t stamp = shared.read(scheme, w_hat);
            grad_component_into(data[i], w_hat, cfg.lambda, g);
            const std::uint64_t m = shared.write(scheme, g, -gamma, false);
            max_delay[wid] = std::max(max_delay[wid], m - stamp);
          }
        },
        abort, "hogwild epoch " + std::to_string(t));
    gamma *= cfg.decay;
    current = shared.snapshot();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::tuple{shared.updates() - before, *std::max_element(max_delay.begin(), max_delay.end()), secs};
  };
  return detail::drive(data, cfg.lambda, w0, cfg.epochs, passes, opts, epoch_step,
                       [&]() -> const ParamVector& { return current; });
}

/// Step-size grid, in units of 1/L.
inline constexpr std::array<double, 4> kStepGrid{1.0, 0.5, 0.1, 0.05};

/// Picks the grid step with the lowest final objective; `trial(step)` returns
/// that objective and may throw DivergenceError to disqualify a step.
template <typename Trial>
double tune_step(double smoothness, Trial&& trial) {
  double best_step = std::numeric_limits<double>::quiet_NaN();
  double best_f = std::numeric_limits<double>::infinity();
  for (double scale : kStepGrid) {
    const double step = scale / smoothness;
    try {
      const double f = trial(step);
      if (f < best_f) {
        best_f = f;
        best_step = step;
      }
    } catch (const DivergenceError&) {
    }
  }
  if (std::isnan(best_step)) throw std::runtime_error("tune_step: every grid step diverged");
  return best_step;
}

}  // namespace asysvrg
