#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "asysvrg/baselines.hpp"
#include "asysvrg/libsvm.hpp"
#include "asysvrg/synthetic.hpp"

using namespace asysvrg;

TEST(Synthetic, DeterministicForFixedSeed) {
  const auto a = generate_synthetic(100, 10, 7, 4.0);
  const auto b = generate_synthetic(100, 10, 7, 4.0);
  EXPECT_EQ(a, b);
  EXPECT_EQ(to_libsvm(a), to_libsvm(b));
  EXPECT_NE(to_libsvm(a), to_libsvm(generate_synthetic(100, 10, 8, 4.0)));
}

TEST(Synthetic, RowsAreUnitNorm) {
  const auto data = generate_synthetic(200, 13, 2, 4.0);
  EXPECT_EQ(data.size(), 200u);
  EXPECT_EQ(data.dim(), 13u);
  for (const auto& ex : data.examples()) EXPECT_NEAR(squared_norm(ex), 1.0, 1e-14);
}

TEST(Synthetic, NoiselessLabelsAgreeWithPlantedVector) {
  const SyntheticSpec spec{500, 12, 5, std::numeric_limits<double>::infinity()};
  const auto data = generate_synthetic(spec);
  const auto w = planted_weights(spec);
  for (const auto& ex : data.examples()) {
    double m = 0.0;
    for (std::size_t k = 0; k < ex.indices.size(); ++k) m += ex.values[k] * w[ex.indices[k]];
    EXPECT_GT(ex.label * m, -1e-300);
  }
}

TEST(Synthetic, NoisyLabelsAreMixed) {
  const auto data = generate_synthetic(1000, 20, 1, 4.0);
  int pos = 0;
  for (const auto& ex : data.examples()) pos += ex.label > 0;
  EXPECT_GT(pos, 300);
  EXPECT_LT(pos, 700);
}

TEST(Synthetic, HeaderRoundTrip) {
  for (const SyntheticSpec spec :
       {SyntheticSpec{}, SyntheticSpec{3, 4, 99, 0.5}, SyntheticSpec{10, 2, 1, std::numeric_limits<double>::infinity()}}) {
    const auto back = SyntheticSpec::from_header(spec.to_header());
    EXPECT_EQ(back.n, spec.n);
    EXPECT_EQ(back.d, spec.d);
    EXPECT_EQ(back.seed, spec.seed);
    EXPECT_EQ(back.separation, spec.separation);
  }
  EXPECT_THROW(SyntheticSpec::from_header("n=3\n"), std::invalid_argument);
}

TEST(Synthetic, RejectsEmptyShape) {
  EXPECT_THROW(generate_synthetic(0, 3, 1, 1.0), std::invalid_argument);
  EXPECT_THROW(generate_synthetic(3, 0, 1, 1.0), std::invalid_argument);
}

// The desk-scale fixture: sequential SVRG reaches gap < 1e-10 within 50 epochs.
TEST(Synthetic, FixtureSolvesToHighPrecision) {
  const auto data = generate_synthetic(1000, 20, 1, 4.0);
  const double lambda = 0.01;
  const auto ref = reference_optimum(data, lambda);
  EXPECT_LE(ref.grad_norm, 1e-10);
  const double L = smoothness_constant(data, lambda);
  const auto traj = svrg_sequential(data, ParamVector(20, 0.0), 0.1 / L, 2 * data.size(), 50, 4, lambda);
  EXPECT_LT(traj.objectives.back() - ref.f, 1e-10);
}
