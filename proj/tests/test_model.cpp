#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "asysvrg/baselines.hpp"
#include "asysvrg/model.hpp"
#include "asysvrg/synthetic.hpp"
#include "oracles.hpp"

using namespace asysvrg;

namespace {

Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SparseExample> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(oracle::random_example(d, rng));
  return Dataset(std::move(rows), d);
}

const Dataset& fixture() {
  static const Dataset data = generate_synthetic(200, 8, 3, 4.0);
  return data;
}

const ReferenceOptimum& fixture_optimum() {
  static const ReferenceOptimum ref = reference_optimum(fixture(), 0.01);
  return ref;
}

}  // namespace

TEST(Objective, ZeroWeightsGiveLogTwo) {
  const auto data = random_dataset(7, 5, 1);
  EXPECT_NEAR(objective(data, ParamVector(5, 0.0), 0.0), std::log(2.0), 1e-15);
}

TEST(Objective, RegularizerVanishesAtZero) {
  const Dataset one({{{0}, {1.0}, 1}}, 1);
  EXPECT_NEAR(objective(one, ParamVector{0.0}, 2.0), 0.6931471805599453, 1e-15);
}

TEST(Objective, MatchesScalarLoopOracle) {
  const auto data = random_dataset(5, 12, 42);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = oracle::random_vector(12, rng);
    const double got = objective(data, w, 1e-4);
    const double want = static_cast<double>(oracle::objective(data, w, 1e-4));
    EXPECT_NEAR(got, want, 1e-12 * std::abs(want));
  }
}

TEST(Objective, DimensionMismatchThrows) {
  const auto data = random_dataset(3, 4, 2);
  EXPECT_THROW(objective(data, ParamVector(5, 0.0), 0.0), DimensionError);
}

TEST(Objective, NonFiniteResultThrows) {
  const auto data = random_dataset(3, 4, 2);
  ParamVector w(4, 0.0);
  w[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(objective(data, w, 1.0), std::runtime_error);
}

TEST(Objective, StableForLargeMargins) {
  const Dataset one({{{0}, {1.0}, 1}}, 1);
  for (double z : {-700.0, -300.0, 300.0, 700.0}) {
    const double f = objective(one, ParamVector{z}, 0.0);
    ASSERT_TRUE(std::isfinite(f));
    if (z < 0) {
      EXPECT_NEAR(f, -z, 1e-12 * -z);
    } else {
      EXPECT_GE(f, 0.0);
    }
  }
  EXPECT_TRUE(std::isfinite(softplus(800.0)));
  EXPECT_EQ(sigmoid(-800.0), 0.0);
}

TEST(GradComponent, AtZeroIsHalfNegativeLabelTimesX) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 5; ++k) {
    const auto ex = oracle::random_example(9, rng);
    const auto g = grad_component(ex, ParamVector(9, 0.0), 0.0);
    const auto x = oracle::densify(ex, 9);
    for (std::size_t j = 0; j < 9; ++j) EXPECT_DOUBLE_EQ(g[j], -0.5 * ex.label * x[j]);
  }
}

TEST(GradComponent, MatchesCentralDifferences) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng() % 50;
    const auto ex = oracle::random_example(d, rng);
    const auto w = oracle::random_vector(d, rng, 0.5);
    const double lambda = trial % 2 ? 0.0 : 0.1;
    const auto g = grad_component(ex, w, lambda);
    const auto fd = oracle::fd_gradient(ex, w, lambda, 1e-6);
    double num = 0, den = 0;
    for (std::size_t j = 0; j < d; ++j) {
      num += (g[j] - fd[j]) * (g[j] - fd[j]);
      den += fd[j] * fd[j];
    }
    if (den > 0) {
      EXPECT_LE(std::sqrt(num / den), 1e-5) << "trial " << trial;
    }
  }
}

TEST(GradComponent, ZeroFeaturesGiveZeroGradient) {
  const SparseExample empty{{}, {}, -1};
  const auto g = grad_component(empty, ParamVector{1.0, -2.0, 3.0}, 0.0);
  for (double x : g) EXPECT_EQ(x, 0.0);
}

TEST(GradComponent, RejectsOutOfRangeFeature) {
  const SparseExample ex{{4}, {1.0}, 1};
  EXPECT_THROW(grad_component(ex, ParamVector(3, 0.0), 0.0), DimensionError);
}

TEST(FullGradient, VanishesAtReferenceOptimum) {
  const auto& ref = fixture_optimum();
  const auto g = full_gradient(fixture(), ref.w, 0.01);
  EXPECT_LE(std::sqrt(squared_norm(g)), 1e-8);
}

TEST(FullGradient, PartitionedMatchesUnpartitioned) {
  const auto& data = fixture();
  std::mt19937_64 rng(3);
  const auto w = oracle::random_vector(data.dim(), rng);
  const auto whole = full_gradient(data, w, 0.01);
  const auto blocks = block_partition(data.size(), 4);
  const auto split = full_gradient(data, w, 0.01, &blocks);
  for (std::size_t j = 0; j < whole.size(); ++j) EXPECT_NEAR(split[j], whole[j], 1e-12);

  // An interleaved (non-contiguous) cover is equally valid.
  std::vector<std::vector<std::size_t>> strided(3);
  for (std::size_t i = 0; i < data.size(); ++i) strided[i % 3].push_back(i);
  const auto str = full_gradient(data, w, 0.01, &strided);
  for (std::size_t j = 0; j < whole.size(); ++j) EXPECT_NEAR(str[j], whole[j], 1e-12);
}

TEST(FullGradient, EqualsAverageOfComponents) {
  const auto& data = fixture();
  std::mt19937_64 rng(4);
  const auto w = oracle::random_vector(data.dim(), rng);
  ParamVector avg(data.dim(), 0.0);
  for (const auto& ex : data.examples()) {
    const auto g = grad_component(ex, w, 0.01);
    for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += g[j];
  }
  const auto full = full_gradient(data, w, 0.01);
  const auto dense = oracle::full_gradient(data, w, 0.01);
  for (std::size_t j = 0; j < avg.size(); ++j) {
    EXPECT_NEAR(avg[j] / data.size(), full[j], 1e-14);
    EXPECT_NEAR(full[j], static_cast<double>(dense[j]), 1e-14);
  }
}

TEST(FullGradient, RejectsBadPartitions) {
  const auto& data = fixture();
  const ParamVector w(data.dim(), 0.0);
  auto blocks = block_partition(data.size(), 2);
  blocks[1].push_back(0);
  EXPECT_THROW(full_gradient(data, w, 0.0, &blocks), std::invalid_argument);
  auto incomplete = block_partition(data.size(), 2);
  incomplete[0].pop_back();
  EXPECT_THROW(full_gradient(data, w, 0.0, &incomplete), std::invalid_argument);
}

TEST(VrUpdate, EqualsSnapshotGradientWhenReadIsSnapshot) {
  const auto& data = fixture();
  std::mt19937_64 rng(8);
  const auto u0 = oracle::random_vector(data.dim(), rng);
  const auto g0 = full_gradient(data, u0, 0.01);
  for (std::size_t i = 0; i < data.size(); i += 17) {
    const auto v = vr_update_vector(data, i, u0, u0, g0, 0.01);
    for (std::size_t j = 0; j < v.size(); ++j) EXPECT_EQ(v[j], g0[j]);
  }
}

TEST(VrUpdate, AverageOverInstancesIsFullGradient) {
  const auto& data = fixture();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto u = oracle::random_vector(data.dim(), rng);
    const auto u0 = oracle::random_vector(data.dim(), rng);
    const auto g0 = full_gradient(data, u0, 0.01);
    ParamVector avg(data.dim(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto v = vr_update_vector(data, i, u, u0, g0, 0.01);
      for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += v[j] / data.size();
    }
    const auto want = oracle::full_gradient(data, u, 0.01);
    for (std::size_t j = 0; j < avg.size(); ++j) EXPECT_NEAR(avg[j], static_cast<double>(want[j]), 1e-12);
  }
}

TEST(VrUpdate, VanishesAtJointOptimum) {
  const auto& data = fixture();
  const auto& ref = fixture_optimum();
  const auto g0 = full_gradient(data, ref.w, 0.01);
  double q = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) q += squared_norm(vr_update_vector(data, i, ref.w, ref.w, g0, 0.01));
  q /= data.size();
  EXPECT_LE(q, 1e-16);
  EXPECT_NEAR(q, squared_norm(g0), 1e-30);
}

TEST(VrUpdate, DimensionMismatchThrows) {
  const auto& data = fixture();
  const ParamVector ok(data.dim(), 0.0), bad(data.dim() + 1, 0.0);
  EXPECT_THROW(vr_update_vector(data, 0, bad, ok, ok, 0.0), DimensionError);
  EXPECT_THROW(vr_update_vector(data, 0, ok, ok, bad, 0.0), DimensionError);
}

TEST(Constants, SmoothnessFormula) {
  const Dataset one({{{0, 1}, {std::sqrt(2.0), std::sqrt(2.0)}, 1}}, 2);
  EXPECT_NEAR(smoothness_constant(one, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(smoothness_constant(fixture(), 1e-4), 0.2501, 1e-12);
}

TEST(Constants, SmoothnessBoundsGradientDifferences) {
  const auto data = random_dataset(30, 10, 77);
  const double L = smoothness_constant(data, 0.05);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    const auto& ex = data[rng() % data.size()];
    const auto a = oracle::random_vector(10, rng, 3.0), b = oracle::random_vector(10, rng, 3.0);
    const auto ga = grad_component(ex, a, 0.05), gb = grad_component(ex, b, 0.05);
    double dg = 0, dx = 0;
    for (std::size_t j = 0; j < 10; ++j) {
      dg += (ga[j] - gb[j]) * (ga[j] - gb[j]);
      dx += (a[j] - b[j]) * (a[j] - b[j]);
    }
    EXPECT_LE(std::sqrt(dg), L * std::sqrt(dx) * (1 + 1e-12));
  }
}

TEST(Constants, StrongConvexity) {
  EXPECT_EQ(strong_convexity_constant(1e-4), 1e-4);
  EXPECT_EQ(strong_convexity_constant(1.0), 1.0);
  EXPECT_THROW(strong_convexity_constant(0.0), std::invalid_argument);
  EXPECT_THROW(strong_convexity_constant(-1.0), std::invalid_argument);
}

TEST(Constants, StrongConvexityInequalityHoldsOnSamples) {
  const auto& data = fixture();
  const double lambda = 0.01, mu = strong_convexity_constant(lambda);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const auto a = oracle::random_vector(data.dim(), rng), b = oracle::random_vector(data.dim(), rng);
    const auto gb = full_gradient(data, b, lambda);
    double lin = 0, dist = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      lin += gb[j] * (a[j] - b[j]);
      dist += (a[j] - b[j]) * (a[j] - b[j]);
    }
    EXPECT_GE(objective(data, a, lambda), objective(data, b, lambda) + lin + 0.5 * mu * dist - 1e-12);
  }
}

TEST(Constants, VarianceBoundAtRandomPoints) {
  const auto& data = fixture();
  const double lambda = 0.01, L = smoothness_constant(data, lambda);
  const auto& ref = fixture_optimum();
  std::mt19937_64 rng(6);
  for (int k = 0; k < 30; ++k) {
    auto u0 = ref.w, u = ref.w;
    const auto du0 = oracle::random_vector(data.dim(), rng, 0.5), du = oracle::random_vector(data.dim(), rng, 0.5);
    for (std::size_t j = 0; j < u.size(); ++j) {
      u0[j] += du0[j];
      u[j] += du[j];
    }
    const auto g0 = full_gradient(data, u0, lambda);
    double q = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) q += squared_norm(vr_update_vector(data, i, u, u0, g0, lambda));
    q /= data.size();
    const double rhs = 4 * L * (objective(data, u, lambda) - ref.f + objective(data, u0, lambda) - ref.f);
    EXPECT_LE(q, rhs);
  }
}

TEST(Dataset, ValidatesExamples) {
  EXPECT_THROW(Dataset({}, 3), std::invalid_argument);
  EXPECT_THROW(Dataset({{{0}, {1.0}, 1}}, 0), std::invalid_argument);
  EXPECT_THROW(Dataset({{{0}, {1.0}, 0}}, 2), std::invalid_argument);
  EXPECT_THROW(Dataset({{{1, 0}, {1.0, 1.0}, 1}}, 2), std::invalid_argument);
  EXPECT_THROW(Dataset({{{2}, {1.0}, 1}}, 2), DimensionError);
}
