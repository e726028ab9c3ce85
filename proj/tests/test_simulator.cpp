#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "asysvrg/baselines.hpp"
#include "asysvrg/schedule.hpp"
#include "asysvrg/simulator.hpp"
#include "asysvrg/synthetic.hpp"
#include "oracles.hpp"

using namespace asysvrg;

namespace {

constexpr double kLambda = 0.01;

const Dataset& small() {
  static const Dataset data = generate_synthetic(100, 5, 6, 4.0);
  return data;
}

const Dataset& medium() {
  static const Dataset data = generate_synthetic(200, 8, 2, 4.0);
  return data;
}

SimConfig sim_config(Scheme scheme, double step, std::size_t epochs, IterateOption opt = IterateOption::AverageIterate) {
  SimConfig c;
  c.scheme = scheme;
  c.step = step;
  c.lambda = kLambda;
  c.epochs = epochs;
  c.seed = 31;
  c.option = opt;
  return c;
}

Schedule saturating(unsigned p, std::size_t per_worker, unsigned tau, std::uint64_t seed, MaskPolicy masks,
                    std::size_t dim) {
  Rng rng = worker_stream(seed, 99, 0);
  return random_schedule({p, per_worker, tau, true, masks}, dim, rng);
}

}  // namespace

TEST(Schedule, SequentialIsValidWithZeroDelay) {
  const auto s = sequential_schedule(10);
  const auto d = validate_schedule(s, 0, false);
  EXPECT_EQ(d.max_delay, 0u);
  EXPECT_EQ(s.updates(), 10u);
  EXPECT_EQ(s.workers(), 1u);
}

TEST(Schedule, ValidationRejectsBrokenSchedules) {
  auto expect_error = [](const std::string& text, std::size_t event, bool masks = true) {
    try {
      validate_schedule(parse_schedule(text), 4, masks);
      ADD_FAILURE() << text;
    } catch (const ScheduleError& e) {
      EXPECT_EQ(e.event(), event) << text << ": " << e.what();
    }
  };
  expect_error("tau 0\n0 APPLY\n", 0);
  expect_error("tau 1\n0 SNAPSHOT\n0 SNAPSHOT\n", 1);
  expect_error("tau 1\n0 SNAPSHOT\n", 0);
  // Worker 0 reads at 0 and applies as update 2: delay 2 > tau 1.
  expect_error("tau 1\n0 SNAPSHOT\n1 SNAPSHOT\n2 SNAPSHOT\n1 APPLY\n2 APPLY\n0 APPLY\n", 5);
  expect_error("tau 2\n0 SNAPSHOT newer=1\n1 SNAPSHOT\n1 APPLY\n0 APPLY\n", 0, false);
  // A mixed read with nothing written in between is impossible.
  expect_error("tau 2\n0 SNAPSHOT newer=1\n0 APPLY\n", 0);
  expect_error("tau 2\n0 SNAPSHOT newer=9\n1 SNAPSHOT\n1 APPLY\n0 APPLY\n", 0);
}

TEST(Schedule, TextRoundTripAndParseErrors) {
  const auto s = saturating(3, 5, 2, 1, MaskPolicy::Random, 6);
  std::ostringstream out;
  write_schedule(out, s);
  EXPECT_EQ(parse_schedule(out.str()), s);

  const auto parsed = parse_schedule("# comment\ntau 2\n0 SNAPSHOT newer=0,2-4 # trailing\n\n1 SNAPSHOT\n1 APPLY\n0 APPLY\n");
  EXPECT_EQ(parsed.tau, 2u);
  EXPECT_EQ(parsed.events[0].newer, (std::vector<std::uint32_t>{0, 2, 3, 4}));

  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_schedule(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("tau 1\n0 SNAP\n"), 2u);
  EXPECT_EQ(line_of("tau 1\n0 SNAPSHOT\nx APPLY\n"), 3u);
  EXPECT_EQ(line_of("0 APPLY newer=1\n"), 1u);
  EXPECT_EQ(line_of("0 SNAPSHOT newer=3-1\n"), 1u);
  EXPECT_EQ(line_of("0 SNAPSHOT newer=a\n"), 1u);
}

TEST(Schedule, RandomSchedulesRespectTau) {
  for (unsigned tau : {0u, 1u, 3u, 6u}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng = worker_stream(seed, tau, 0);
      const auto s = random_schedule({4, 25, tau, seed % 2 == 0, MaskPolicy::Random}, 5, rng);
      EXPECT_EQ(s.updates(), 100u);
      const auto d = validate_schedule(s, 5, true);
      EXPECT_LE(d.max_delay, tau);
    }
  }
}

TEST(Simulator, SingleWorkerMatchesSequentialBitwise) {
  const auto& data = small();
  const double step = 0.2 / smoothness_constant(data, kLambda);
  const ParamVector w0(data.dim(), 0.0);
  for (IterateOption opt : {IterateOption::CurrentIterate, IterateOption::AverageIterate}) {
    for (Scheme sc : {Scheme::ConsistentLock, Scheme::InconsistentLock}) {
      const auto log = simulate(data, sim_config(sc, step, 5, opt), sequential_schedule(200), w0);
      const auto seq = svrg_sequential(data, w0, step, 200, 5, 31, kLambda, opt);
      EXPECT_EQ(log.snapshots, seq.snapshots);
      EXPECT_EQ(log.objectives, seq.objectives);
      EXPECT_EQ(log.max_delay, 0u);
    }
  }
}

TEST(Simulator, SaturatingScheduleHitsTauExactly) {
  const auto& data = small();
  const auto s = saturating(4, 30, 3, 5, MaskPolicy::None, data.dim());
  const auto log = simulate(data, sim_config(Scheme::ConsistentLock, 0.1, 1), s, ParamVector(data.dim(), 0.0));
  EXPECT_EQ(log.max_delay, 3u);
  EXPECT_EQ(check_delay_bound(log, 3).violations, 0u);
}

TEST(Simulator, RejectsScheduleBeforeRunning) {
  const auto& data = small();
  auto s = parse_schedule("tau 0\n0 SNAPSHOT\n1 SNAPSHOT\n0 APPLY\n1 APPLY\n");
  EXPECT_THROW(simulate(data, sim_config(Scheme::ConsistentLock, 0.1, 1), s, ParamVector(data.dim(), 0.0)),
               ScheduleError);
  EXPECT_THROW(Simulator(data, sim_config(Scheme::LockFree, 0.1, 1)), std::invalid_argument);
}

TEST(Simulator, DeterministicLogs) {
  const auto& data = small();
  const auto cfg = sim_config(Scheme::InconsistentLock, 0.3, 3);
  const auto src = random_schedule_source({3, 40, 2, false, MaskPolicy::Random}, data.dim(), 17);
  const auto a = simulate(data, cfg, src, ParamVector(data.dim(), 0.0));
  const auto b = simulate(data, cfg, src, ParamVector(data.dim(), 0.0));
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    EXPECT_EQ(a.steps[k].u, b.steps[k].u);
    EXPECT_EQ(a.steps[k].v, b.steps[k].v);
    EXPECT_EQ(a.steps[k].instance, b.steps[k].instance);
  }
  EXPECT_EQ(a.snapshots, b.snapshots);
}

// u_{m+1} = u_m - eta v_m exactly, and each read is P_old u_a + P_new u_{a+1}.
TEST(Simulator, StepRecurrenceAndMaskFidelity) {
  const auto& data = small();
  const double eta = 0.3;
  const auto cfg = sim_config(Scheme::InconsistentLock, eta, 2, IterateOption::CurrentIterate);
  const auto src = random_schedule_source({4, 30, 3, true, MaskPolicy::Random}, data.dim(), 3);
  const auto log = simulate(data, cfg, src, ParamVector(data.dim(), 0.0));
  std::size_t start = 0, mixed = 0;
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const auto& s = log.steps[k];
    if (s.m == 0) start = k;
    const bool last = k + 1 == log.steps.size() || log.steps[k + 1].m == 0;
    const ParamVector& next = last ? log.snapshots[s.epoch + 1] : log.steps[k + 1].u;
    for (std::size_t j = 0; j < s.u.size(); ++j) EXPECT_EQ(next[j], s.u[j] - eta * s.v[j]);

    const ParamVector& ua = log.steps[start + s.read_stamp].u;
    const ParamVector& ua1 = s.read_stamp + 1 < s.m ? log.steps[start + s.read_stamp + 1].u : s.u;
    std::vector<char> is_new(s.u.size(), 0);
    for (auto j : s.newer) is_new[j] = 1;
    for (std::size_t j = 0; j < s.u.size(); ++j) EXPECT_EQ(s.u_hat[j], is_new[j] ? ua1[j] : ua[j]);
    mixed += !s.newer.empty();
  }
  EXPECT_GT(mixed, 10u);
}

TEST(Simulator, QAtEpochStartIsSquaredGradientNorm) {
  const auto& data = small();
  std::mt19937_64 rng(2);
  const auto w0 = oracle::random_vector(data.dim(), rng, 0.5);
  auto log = simulate(data, sim_config(Scheme::ConsistentLock, 0.1, 1), sequential_schedule(20), w0);
  measure_q_sequence(log, data, kLambda);
  const auto g = oracle::full_gradient(data, w0, kLambda);
  long double want = 0;
  for (auto x : g) want += x * x;
  EXPECT_NEAR(log.steps[0].q, static_cast<double>(want), 1e-14);
  EXPECT_EQ(log.steps[0].q, log.steps[0].q_hat);
}

TEST(Simulator, VarianceBoundHoldsEverywhere) {
  const auto& data = medium();
  const double L = smoothness_constant(data, kLambda);
  const double fs = reference_optimum(data, kLambda).f;
  for (Scheme sc : {Scheme::ConsistentLock, Scheme::InconsistentLock}) {
    const auto masks = sc == Scheme::InconsistentLock ? MaskPolicy::Random : MaskPolicy::None;
    auto log = simulate(data, sim_config(sc, 0.5 / L, 4), random_schedule_source({4, 100, 3, false, masks}, data.dim(), 5),
                        ParamVector(data.dim(), 0.0));
    measure_q_sequence(log, data, kLambda);
    const auto chk = check_variance_bound(log, data, kLambda, L, fs);
    EXPECT_EQ(chk.checked, 1600u);
    EXPECT_EQ(chk.violations, 0u) << chk.worst_ratio;
  }
}

TEST(Simulator, ReadDeviationBoundUnderAdversarialMasks) {
  const auto& data = small();
  for (unsigned tau : {1u, 2u, 3u, 4u}) {
    for (MaskPolicy mp : {MaskPolicy::Random, MaskPolicy::AllNewer}) {
      const auto log = simulate(data, sim_config(Scheme::InconsistentLock, 0.5, 2),
                                random_schedule_source({5, 40, tau, true, mp}, data.dim(), tau), ParamVector(data.dim(), 0.0));
      const auto four = check_read_deviation(log);
      EXPECT_EQ(four.violations, 0u) << "tau=" << tau << " worst=" << four.worst_ratio;
      EXPECT_EQ(check_read_deviation(log, ReadBound::Delay).violations, 0u);
    }
  }
}

// Beyond delay 4 the fixed factor can fail while the delay-scaled form holds.
TEST(Simulator, ReadDeviationFixedFactorIsDelayLimited) {
  const auto& data = small();
  const auto log = simulate(data, sim_config(Scheme::ConsistentLock, 1e-3, 1),
                            random_schedule_source({10, 40, 9, true, MaskPolicy::None}, data.dim(), 1),
                            ParamVector(data.dim(), 0.0));
  EXPECT_GT(check_read_deviation(log).violations, 0u);
  EXPECT_EQ(check_read_deviation(log, ReadBound::Delay).violations, 0u);
}

// E q_m <= rho E q_{m+1}, as a 2-sigma test on the paired differences
// q_m - rho q_{m+1} over 200 seeded schedules.
TEST(Simulator, QRatioBoundedByRhoInMonteCarlo) {
  const auto& data = small();
  const double L = smoothness_constant(data, kLambda);
  const double eta = 0.02;
  const unsigned tau = 2;
  const auto rho = rho_consistent(1.0 / eta, eta, L, tau);
  ASSERT_TRUE(rho.feasible);
  constexpr std::size_t kSeeds = 200, kSteps = 30;
  std::vector<std::vector<double>> q(kSteps, std::vector<double>(kSeeds));
  for (std::size_t s = 0; s < kSeeds; ++s) {
    auto cfg = sim_config(Scheme::ConsistentLock, eta, 1);
    cfg.seed = 1000 + s;
    auto log = simulate(data, cfg, random_schedule_source({3, kSteps / 3, tau, false, MaskPolicy::None}, data.dim(), s),
                        ParamVector(data.dim(), 0.0));
    measure_q_sequence(log, data, kLambda);
    for (std::size_t m = 0; m < kSteps; ++m) q[m][s] = log.steps[m].q;
  }
  for (std::size_t m = 0; m + 1 < kSteps; ++m) {
    double mean = 0, sq = 0;
    for (std::size_t s = 0; s < kSeeds; ++s) {
      const double x = q[m][s] - rho.rho * q[m + 1][s];
      mean += x;
      sq += x * x;
    }
    mean /= kSeeds;
    const double sd = std::sqrt(std::max(0.0, sq / kSeeds - mean * mean));
    EXPECT_LE(mean, 2.0 * sd / std::sqrt(double(kSeeds))) << "m=" << m;
  }
}

TEST(Simulator, TauZeroCertificateHoldsOnSequentialRuns) {
  const auto& data = medium();
  const double L = smoothness_constant(data, kLambda), mu = kLambda;
  const std::size_t mt = 10 * data.size();
  const auto eta = max_certified_step(L, mu, 0, static_cast<double>(mt), Scheme::ConsistentLock);
  ASSERT_TRUE(eta);
  const auto cert = certify(Scheme::ConsistentLock, L, mu, *eta, 0, static_cast<double>(mt));
  ASSERT_TRUE(cert.valid);
  const auto ref = reference_optimum(data, kLambda);
  const auto rep = validate_certificate(data, sim_config(Scheme::ConsistentLock, *eta, 6), cert, {1, mt, 0, false},
                                        20, ref.f, ParamVector(data.dim(), 0.0));
  ASSERT_FALSE(rep.ratios.empty());
  EXPECT_LE(rep.max_ratio, cert.alpha + 0.05);
  EXPECT_EQ(rep.max_delay, 0u);
}

TEST(Simulator, TrajectoryCsvHasOneRowPerStep) {
  const auto& data = small();
  auto log = simulate(data, sim_config(Scheme::ConsistentLock, 0.1, 2), sequential_schedule(7), ParamVector(data.dim(), 0.0));
  measure_q_sequence(log, data, kLambda);
  std::ostringstream out;
  write_trajectory_csv(out, log, true);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("epoch,m,worker,instance,read_stamp,delay,q,q_hat,u_0", 0), 0u);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7 + 2 * 5);
  }
  EXPECT_EQ(rows, 14u);
}
