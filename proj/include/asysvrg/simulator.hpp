#pragma once

// Single-threaded replay of asynchronous SVRG under explicit interleavings.
//
// Virtual workers follow a Schedule. A consistent SNAPSHOT copies u_a; an
// inconsistent one resolves at APPLY time to P_old u_a + P_new u_{a+1}, with
// P_new the event's `newer` coordinates. Sampling uses worker_stream(seed,
// worker, epoch), so one worker with the alternating schedule reproduces
// svrg_sequential bit for bit.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asysvrg/baselines.hpp"
#include "asysvrg/engine.hpp"
#include "asysvrg/model.hpp"
#include "asysvrg/rng.hpp"
#include "asysvrg/schedule.hpp"
#include "asysvrg/theory.hpp"

namespace asysvrg {

struct SimConfig {
  Scheme scheme = Scheme::ConsistentLock;
  double step = 0.1;
  double lambda = 1e-4;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  IterateOption option = IterateOption::AverageIterate;
  bool record_steps = true;
};

struct StepRecord {
  std::size_t epoch = 0;
  std::uint64_t m = 0;
  unsigned worker = 0;
  std::size_t instance = 0;
  std::uint64_t read_stamp = 0;
  ParamVector u;      // u_m, the iterate the update is applied to
  ParamVector u_hat;  // the read the update was computed from
  ParamVector v;      // v_hat_m
  std::vector<std::uint32_t> newer;
  double q = std::numeric_limits<double>::quiet_NaN();
  double q_hat = std::numeric_limits<double>::quiet_NaN();
};

struct EpochRecord {
  ParamVector w;  // snapshot w_t the epoch started from
  double f = 0.0;
  ParamVector g0;
  std::vector<double> deriv0;
};

struct TrajectoryLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;  // per started epoch
  std::vector<ParamVector> snapshots;  // w_0 .. w_T
  std::vector<double> objectives;      // f(w_0) .. f(w_T)
  std::uint64_t max_delay = 0;
};

using ScheduleSource = std::function<Schedule(std::size_t epoch)>;

class Simulator {
 public:
  Simulator(const Dataset& data, SimConfig cfg) : data_(data), cfg_(cfg) {
    if (cfg_.scheme == Scheme::LockFree)
      throw std::invalid_argument("simulator models consistent and inconsistent reads only");
    if (!(cfg_.step >= 0.0)) throw std::invalid_argument("simulator: step must be >= 0");
  }

  TrajectoryLog run(const ParamVector& w0, const ScheduleSource& source) const {
    detail::require_dim(w0.size(), data_.dim(), "simulate w0");
    const std::size_t d = data_.dim();
    const bool inconsistent = cfg_.scheme == Scheme::InconsistentLock;
    TrajectoryLog log;
    ParamVector w = w0;
    log.snapshots.push_back(w);
    log.objectives.push_back(objective(data_, w, cfg_.lambda));
    IndexSampler sample(data_.size());

    for (std::size_t t = 0; t < cfg_.epochs; ++t) {
      const Schedule sched = source(t);
      const auto delays = validate_schedule(sched, d, inconsistent);
      log.max_delay = std::max(log.max_delay, delays.max_delay);

      EpochRecord ep;
      ep.w = w;
      ep.f = log.objectives.back();
      ep.deriv0.resize(data_.size());
      ep.g0 = full_gradient(data_, w, cfg_.lambda, nullptr, ep.deriv0);

      const unsigned p = std::max(1U, sched.workers());
      std::vector<Rng> rngs;
      for (unsigned k = 0; k < p; ++k) rngs.push_back(worker_stream(cfg_.seed, k, t));
      struct Read {
        std::uint64_t stamp = 0;
        std::vector<std::uint32_t> newer;
      };
      std::vector<Read> reads(p);

      std::vector<ParamVector> history{w};  // u_0 .. u_m of this epoch
      ParamVector u = w, sum(d, 0.0), u_hat(d), v(d);
      std::uint64_t m = 0;
      for (const auto& e : sched.events) {
        if (e.action == Action::Snapshot) {
          reads[e.worker] = {m, e.newer};
          continue;
        }
        const Read& rd = reads[e.worker];
        read_snapshot(history, rd.stamp, rd.newer, u_hat);
        const std::size_t i = sample(rngs[e.worker]);
        vr_update_into(data_[i], u_hat, ep.w, ep.deriv0[i], ep.g0, cfg_.lambda, v);
        if (cfg_.record_steps) log.steps.push_back({t, m, e.worker, i, rd.stamp, u, u_hat, v, rd.newer});
        for (std::size_t j = 0; j < d; ++j) {
          if (cfg_.option == IterateOption::AverageIterate) sum[j] += u[j];
          u[j] -= cfg_.step * v[j];
        }
        history.push_back(u);
        ++m;
      }
      if (m > 0) {
        if (cfg_.option == IterateOption::AverageIterate) {
          for (std::size_t j = 0; j < d; ++j) w[j] = sum[j] / static_cast<double>(m);
        } else {
          w = u;
        }
      }
      if (!all_finite(w)) throw std::runtime_error("simulation produced a non-finite iterate in epoch " + std::to_string(t));
      log.epochs.push_back(std::move(ep));
      log.snapshots.push_back(w);
      log.objectives.push_back(objective(data_, w, cfg_.lambda));
    }
    return log;
  }

  TrajectoryLog run(const ParamVector& w0, const Schedule& schedule) const {
    return run(w0, [&](std::size_t) { return schedule; });
  }

 private:
  /// u_hat = P_old u_a + P_new u_{a+1}; re-checks the mask split per element.
  static void read_snapshot(const std::vector<ParamVector>& history, std::uint64_t stamp,
                            const std::vector<std::uint32_t>& newer, ParamVector& out) {
    const ParamVector& old_u = history.at(stamp);
    out = old_u;
    if (newer.empty()) return;
    const ParamVector& new_u = history.at(stamp + 1);
    std::size_t q = 0;
    for (std::size_t j = 0; j < out.size(); ++j) {
      const bool take_new = q < newer.size() && newer[q] == j;
      if (take_new) {
        out[j] = new_u[j];
        ++q;
      }
      if (out[j] != (take_new ? new_u[j] : old_u[j])) throw std::logic_error("mask decomposition mismatch");
    }
    if (q != newer.size()) throw std::logic_error("mask coordinates outside the parameter dimension");
  }

  const Dataset& data_;
  SimConfig cfg_;
};

inline TrajectoryLog simulate(const Dataset& data, const SimConfig& cfg, const Schedule& schedule,
                              const ParamVector& w0) {
  return Simulator(data, cfg).run(w0, schedule);
}

inline TrajectoryLog simulate(const Dataset& data, const SimConfig& cfg, const ScheduleSource& source,
                              const ParamVector& w0) {
  return Simulator(data, cfg).run(w0, source);
}

/// Fresh random tau-bounded schedule per epoch, derived from `seed`.
inline ScheduleSource random_schedule_source(ScheduleSpec spec, std::size_t dim, std::uint64_t seed) {
  return [spec, dim, seed](std::size_t epoch) {
    Rng rng = worker_stream(seed, 0xC0FFEE, epoch);
    return random_schedule(spec, dim, rng);
  };
}

/// (1/n) sum_i ||grad f_i(x) - grad f_i(u0) + g0||^2 by full enumeration.
inline double variance_proxy(const Dataset& data, const EpochRecord& ep, std::span<const double> x, double lambda) {
  ParamVector p(data.dim());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    vr_update_into(data[i], x, ep.w, ep.deriv0[i], ep.g0, lambda, p);
    total += squared_norm(p);
  }
  return total / static_cast<double>(data.size());
}

/// Fills q_m (at u_m) and q_hat_m (at the read u_hat_m) for every step.
inline void measure_q_sequence(TrajectoryLog& log, const Dataset& data, double lambda) {
  for (auto& s : log.steps) {
    const auto& ep = log.epochs.at(s.epoch);
    s.q = variance_proxy(data, ep, s.u, lambda);
    s.q_hat = s.u_hat == s.u ? s.q : variance_proxy(data, ep, s.u_hat, lambda);
  }
}

struct InequalityCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max lhs / rhs
};

/// q_m <= 4L (f(u_m) - f* + f(u_0) - f*) at every step. `slack` absorbs the
/// rounding in f* and f evaluations. Requires measure_q_sequence first.
inline InequalityCheck check_variance_bound(const TrajectoryLog& log, const Dataset& data, double lambda, double L,
                                            double f_star, double slack = 1e-13) {
  InequalityCheck out{"q_m <= 4L(f(u_m)-f*+f(u_0)-f*)"};
  for (const auto& s : log.steps) {
    const auto& ep = log.epochs.at(s.epoch);
    const double rhs = 4.0 * L * ((objective(data, s.u, lambda) - f_star) + (ep.f - f_star));
    ++out.checked;
    if (s.q > rhs + slack) ++out.violations;
    if (rhs > 0.0) out.worst_ratio = std::max(out.worst_ratio, s.q / rhs);
  }
  return out;
}

enum class ReadBound {
  Four,   // the fixed factor 4; implied by the general form whenever delay <= 4
  Delay,  // factor max(m - a(m), 1), which holds for every delay
};

/// ||u_hat_m - u_m||^2 <= K sum_{l=a(m)}^{m-1} ||u_l - u_{l+1}||^2 per step.
/// With u_hat mixing u_a and u_{a+1}, Cauchy-Schwarz per coordinate gives
/// K = m - a(m).
inline InequalityCheck check_read_deviation(const TrajectoryLog& log, ReadBound bound = ReadBound::Four,
                                            double rel_slack = 1e-12) {
  InequalityCheck out{bound == ReadBound::Four ? "||u_hat_m-u_m||^2 <= 4*sum_{l=a(m)}^{m-1}||u_l-u_{l+1}||^2"
                                               : "||u_hat_m-u_m||^2 <= (m-a(m))*sum_{l=a(m)}^{m-1}||u_l-u_{l+1}||^2"};
  std::size_t epoch_start = 0;
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const auto& s = log.steps[k];
    if (s.m == 0) epoch_start = k;
    double lhs = 0.0;
    for (std::size_t j = 0; j < s.u.size(); ++j) lhs += (s.u_hat[j] - s.u[j]) * (s.u_hat[j] - s.u[j]);
    double rhs = 0.0;
    for (std::uint64_t l = s.read_stamp; l < s.m; ++l) {
      const auto& a = log.steps[epoch_start + l].u;
      const auto& b = l + 1 < s.m ? log.steps[epoch_start + l + 1].u : s.u;
      for (std::size_t j = 0; j < a.size(); ++j) rhs += (a[j] - b[j]) * (a[j] - b[j]);
    }
    rhs *= bound == ReadBound::Four ? 4.0 : static_cast<double>(std::max<std::uint64_t>(s.m - s.read_stamp, 1));
    ++out.checked;
    if (lhs > rhs * (1.0 + rel_slack)) ++out.violations;
    if (rhs > 0.0) out.worst_ratio = std::max(out.worst_ratio, lhs / rhs);
  }
  return out;
}

/// Realized delays never exceed the schedule's bound.
inline InequalityCheck check_delay_bound(const TrajectoryLog& log, unsigned tau) {
  InequalityCheck out{"m - a(m) <= tau"};
  for (const auto& s : log.steps) {
    ++out.checked;
    if (s.m - s.read_stamp > tau) ++out.violations;
  }
  return out;
}

inline void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log, bool vectors = false) {
  out << "epoch,m,worker,instance,read_stamp,delay,q,q_hat";
  const std::size_t d = log.steps.empty() ? 0 : log.steps.front().u.size();
  if (vectors) {
    for (std::size_t j = 0; j < d; ++j) out << ",u_" << j;
    for (std::size_t j = 0; j < d; ++j) out << ",v_" << j;
  }
  out << '\n';
  auto num = [](double x) { return std::isnan(x) ? std::string("nan") : detail::format_real(x); };
  for (const auto& s : log.steps) {
    out << s.epoch << ',' << s.m << ',' << s.worker << ',' << s.instance << ',' << s.read_stamp << ','
        << (s.m - s.read_stamp) << ',' << num(s.q) << ',' << num(s.q_hat);
    if (vectors) {
      for (double x : s.u) out << ',' << detail::format_real(x);
      for (double x : s.v) out << ',' << detail::format_real(x);
    }
    out << '\n';
  }
}

struct EmpiricalRateReport {
  std::vector<double> mean_gap;  // per epoch boundary t = 0..T
  std::vector<double> ratios;    // mean_gap[t+1] / mean_gap[t] while above the floor
  double max_ratio = 0.0;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  std::size_t seeds = 0;
  std::uint64_t max_delay = 0;
};

/// Monte-Carlo check of a certificate: `n_seeds` simulated runs with averaged
/// snapshots and random tau-bounded schedules; reports mean gap per epoch and
/// the per-epoch ratio of means. Ratios are taken only while the mean gap is
/// above `gap_floor`, where the reference optimum still resolves it.
inline EmpiricalRateReport validate_certificate(const Dataset& data, SimConfig cfg, const ConvergenceCertificate& cert,
                                                const ScheduleSpec& spec, std::size_t n_seeds, double f_star,
                                                const ParamVector& w0, double gap_floor = 1e-11) {
  EmpiricalRateReport rep;
  rep.alpha = cert.alpha;
  rep.seeds = n_seeds;
  cfg.option = IterateOption::AverageIterate;
  cfg.record_steps = false;
  rep.mean_gap.assign(cfg.epochs + 1, 0.0);
  for (std::size_t s = 0; s < n_seeds; ++s) {
    SimConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + 7919 * s;
    const auto log = simulate(data, run_cfg, random_schedule_source(spec, data.dim(), run_cfg.seed), w0);
    rep.max_delay = std::max(rep.max_delay, log.max_delay);
    for (std::size_t t = 0; t <= cfg.epochs; ++t) rep.mean_gap[t] += (log.objectives[t] - f_star) / n_seeds;
  }
  for (std::size_t t = 0; t < cfg.epochs; ++t) {
    if (rep.mean_gap[t] < gap_floor) break;
    rep.ratios.push_back(rep.mean_gap[t + 1] / rep.mean_gap[t]);
    rep.max_ratio = std::max(rep.max_ratio, rep.ratios.back());
  }
  return rep;
}

}  // namespace asysvrg
