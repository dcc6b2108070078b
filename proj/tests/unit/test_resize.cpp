#include <gtest/gtest.h>

#include <cmath>

#include "ncsr/resize.hpp"
#include "oracles.hpp"

using namespace ncsr;

TEST(BicubicResize, ConstantQuarterShrink) {
  const Tensor x(Shape{1, 1, 4, 4}, 0.7);
  const Tensor y = bicubic_resize(x, 1, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (double v : y.values()) EXPECT_NEAR(v, 0.7, 1e-12);
}

TEST(BicubicResize, ConstantsPreservedAtEveryScale) {
  const int factors[][2] = {{1, 2}, {1, 4}, {1, 8}, {2, 1}, {4, 1}, {3, 2}, {2, 3}};
  for (auto [num, den] : factors) {
    const Tensor x(Shape{2, 3, 24, 48}, -0.31);
    const Tensor y = bicubic_resize(x, num, den);
    for (double v : y.values()) ASSERT_NEAR(v, -0.31, 1e-12) << num << "/" << den;
  }
}

TEST(BicubicResize, RampMatchesTapOracle) {
  Tensor x(Shape{1, 1, 8, 8});
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) x.at(0, 0, i, j) = 0.1 * i + 0.03 * j;
  const Tensor y = bicubic_resize(x, 1, 2);
  const auto taps = oracle::shrink_taps(8, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double ri = 0.0, rj = 0.0;
      for (int k = 0; k < 8; ++k) {
        ri += taps[i][k] * k;
        rj += taps[j][k] * k;
      }
      EXPECT_NEAR(y.at(0, 0, i, j), 0.1 * ri + 0.03 * rj, 1e-12);
    }
}

TEST(BicubicResize, RampExactAwayFromBorders) {
  Tensor x(Shape{1, 1, 32, 32});
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) x.at(0, 0, i, j) = 0.02 * i - 0.01 * j;
  const Tensor y = bicubic_resize(x, 1, 2);
  // Output o samples input coordinate 2o + 0.5; the stretched kernel reaches
  // 4 pixels either side, so o in [2, 13] never touches an edge.
  for (int i = 2; i <= 13; ++i)
    for (int j = 2; j <= 13; ++j) EXPECT_NEAR(y.at(0, 0, i, j), 0.02 * (2 * i + 0.5) - 0.01 * (2 * j + 0.5), 1e-12);
}

TEST(BicubicResize, UpThenDownRoundTrip) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor x = oracle::random_tensor(Shape{1, 1, 4, 4}, seed, 0.0, 1.0);
    const Tensor back = bicubic_resize(bicubic_resize(x, 2, 1), 1, 2);
    double mae = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) mae += std::abs(back[i] - x[i]);
    EXPECT_LT(mae / 16.0, 0.15);
  }
}

TEST(BicubicResize, NonIntegralOutputRejected) {
  EXPECT_THROW(bicubic_resize(Tensor(Shape{1, 1, 5, 5}), 1, 2), ShapeError);
  EXPECT_THROW(bicubic_resize(Tensor(Shape{1, 1, 4, 6}), 1, 4), ShapeError);
}

TEST(BicubicResize, CommutesWithRotation) {
  const Tensor x = oracle::random_tensor(Shape{2, 3, 16, 16}, 4);
  for (int k = 1; k < 4; ++k) {
    const Tensor a = bicubic_resize(rot90(x, k), 1, 4);
    const Tensor b = rot90(bicubic_resize(x, 1, 4), k);
    EXPECT_LT(max_abs_diff(a, b), 1e-9);
  }
  EXPECT_LT(max_abs_diff(bicubic_resize(flip_horizontal(x), 1, 2), flip_horizontal(bicubic_resize(x, 1, 2))), 1e-9);
}

TEST(Resampler, AdjointIdentity) {
  const Resampler r(8, 12, 4, 3);
  const Tensor x = oracle::random_tensor(Shape{1, 2, 8, 12}, 1);
  const Tensor g = oracle::random_tensor(Shape{1, 2, 4, 3}, 2);
  const Tensor rx = r.apply(x), rtg = r.apply_transpose(g);
  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < g.size(); ++i) lhs += rx[i] * g[i];
  for (int64_t i = 0; i < x.size(); ++i) rhs += x[i] * rtg[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(CubicKernel, Interpolates) {
  EXPECT_EQ(cubic_kernel(0.0, -0.5), 1.0);
  EXPECT_EQ(cubic_kernel(1.0, -0.5), 0.0);
  EXPECT_EQ(cubic_kernel(2.0, -0.5), 0.0);
  for (double t = -2.5; t <= 2.5; t += 0.125) EXPECT_NEAR(cubic_kernel(t, -0.5), oracle::keys(t), 1e-15);
}

TEST(AreaDownsample, BlockMeans) {
  Tensor x(Shape{1, 1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor y = area_downsample(x, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_DOUBLE_EQ(y[0], 3.5);
  EXPECT_DOUBLE_EQ(y[1], 5.5);
}

TEST(Rot90, FourTurnsIsIdentity) {
  const Tensor x = oracle::random_tensor(Shape{1, 3, 5, 5}, 9);
  EXPECT_EQ(rot90(rot90(x, 2), 2).vec(), x.vec());
  EXPECT_EQ(rot90(x, 4).vec(), x.vec());
  EXPECT_EQ(flip_horizontal(flip_horizontal(x)).vec(), x.vec());
}
