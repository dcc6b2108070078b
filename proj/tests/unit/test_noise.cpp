#include <gtest/gtest.h>

#include <cmath>

#include "ncsr/noise.hpp"
#include "ncsr/resize.hpp"
#include "oracles.hpp"

using namespace ncsr;

TEST(NoiseDraw, ZeroBoundGivesExactZeros) {
  Rng rng(1);
  const NoiseSample ns = draw_noise(rng, Shape{2, 3, 8, 8}, Shape{2, 3, 2, 2}, 0.0);
  for (double c : ns.c) EXPECT_EQ(c, 0.0);
  for (double v : ns.v.values()) ASSERT_EQ(v, 0.0);
  for (double w : ns.w.values()) ASSERT_EQ(w, 0.0);
}

TEST(NoiseDraw, NegativeBoundRejected) {
  Rng rng(1);
  EXPECT_THROW(draw_noise(rng, Shape{1, 3, 8, 8}, Shape{1, 3, 2, 2}, -0.1), Error);
}

TEST(NoiseDraw, StdMomentsMatchUniformBound) {
  Rng rng(2);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const NoiseSample ns = draw_noise(rng, Shape{1, 1, 2, 2}, Shape{1, 1, 1, 1}, 0.2);
    ASSERT_GE(ns.c[0], 0.0);
    ASSERT_LE(ns.c[0], 0.2);
    sum += ns.c[0];
  }
  EXPECT_NEAR(sum / n, 0.1, 0.005);
}

TEST(NoiseDraw, ConditionalVarianceOfVAndW) {
  Rng rng(3);
  const NoiseSample ns = draw_noise(rng, Shape{1, 3, 256, 256}, Shape{1, 3, 64, 64}, 0.2);
  const double c = ns.c[0];
  ASSERT_GT(c, 0.0);
  auto var = [](const Tensor& t) {
    double m = 0.0, s = 0.0;
    for (double v : t.values()) m += v;
    m /= t.size();
    for (double v : t.values()) s += (v - m) * (v - m);
    return s / t.size();
  };
  EXPECT_NEAR(var(ns.v) / (c * c), 1.0, 0.05);
  EXPECT_NEAR(var(ns.w) / (c * c / 16.0), 1.0, 0.10);
}

TEST(NoiseDraw, WIsAreaAverageOfV) {
  Rng rng(4);
  const NoiseSample ns = draw_noise(rng, Shape{2, 3, 8, 8}, Shape{2, 3, 4, 4}, 0.1);
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 4; ++j) {
          const double want = (ns.v.at(n, c, 2 * i, 2 * j) + ns.v.at(n, c, 2 * i + 1, 2 * j) +
                               ns.v.at(n, c, 2 * i, 2 * j + 1) + ns.v.at(n, c, 2 * i + 1, 2 * j + 1)) /
                              4.0;
          EXPECT_NEAR(ns.w.at(n, c, i, j), want, 1e-15);
        }
}

TEST(NoiseDraw, EachBatchElementHasItsOwnStd) {
  Rng rng(5);
  const NoiseSample ns = draw_noise(rng, Shape{4, 3, 4, 4}, Shape{4, 3, 1, 1}, 0.1);
  ASSERT_EQ(ns.c.size(), 4u);
  EXPECT_NE(ns.c[0], ns.c[1]);
  const NoiseCond nc = ns.cond();
  EXPECT_EQ(nc.c, ns.c);
  EXPECT_EQ(nc.v.vec(), ns.v.vec());
}

TEST(NoiseDraw, ShapeMismatchRejected) {
  Rng rng(1);
  EXPECT_THROW(draw_noise(rng, Shape{1, 3, 8, 8}, Shape{1, 3, 3, 3}, 0.1), Error);
}

TEST(Perturb, ZeroNoiseLeavesInputsBitwise) {
  const Tensor x = oracle::random_tensor(Shape{1, 3, 8, 8}, 1, 0.0, 1.0);
  const Tensor y = bicubic_resize(x, 1, 2);
  const Perturbed p = perturb(x, y, inference_condition(x.shape(), y.shape()));
  EXPECT_EQ(p.x_plus.vec(), x.vec());
  EXPECT_EQ(p.y_plus.vec(), y.vec());
}

TEST(Perturb, ConstantShiftAndLinearity) {
  NoiseSample ns;
  ns.v = Tensor(Shape{1, 3, 4, 4}, 0.1);
  ns.w = Tensor(Shape{1, 3, 2, 2}, 0.1);
  const Perturbed p = perturb(Tensor(Shape{1, 3, 4, 4}, 0.5), Tensor(Shape{1, 3, 2, 2}, 0.5), ns);
  for (double v : p.x_plus.values()) EXPECT_DOUBLE_EQ(v, 0.6);

  Rng rng(6);
  const Tensor x = oracle::random_tensor(Shape{1, 3, 8, 8}, 2, 0.0, 1.0);
  const NoiseSample r = draw_noise(rng, x.shape(), Shape{1, 3, 4, 4}, 0.1);
  const Perturbed q = perturb(x, bicubic_resize(x, 1, 2), r);
  EXPECT_NEAR(mean(q.x_plus) - mean(x), mean(r.v), 1e-15);
}

TEST(Perturb, NoClampAndShapeCheck) {
  NoiseSample ns;
  ns.v = Tensor(Shape{1, 3, 2, 2}, 0.5);
  ns.w = Tensor(Shape{1, 3, 1, 1}, 0.5);
  const Perturbed p = perturb(Tensor(Shape{1, 3, 2, 2}, 0.9), Tensor(Shape{1, 3, 1, 1}, 0.9), ns);
  EXPECT_DOUBLE_EQ(p.x_plus[0], 1.4);
  EXPECT_THROW(perturb(Tensor(Shape{1, 3, 4, 4}), Tensor(Shape{1, 3, 1, 1}), ns), ShapeError);
}

TEST(Perturb, UnbiasedAcrossDraws) {
  Rng rng(7);
  const Shape hr{1, 3, 4, 4};
  const Tensor x(hr, 0.5);
  Tensor acc(hr);
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const NoiseSample ns = draw_noise(rng, hr, Shape{1, 3, 1, 1}, 0.1);
    const Perturbed p = perturb(x, Tensor(Shape{1, 3, 1, 1}, 0.5), ns);
    for (int64_t k = 0; k < acc.size(); ++k) acc[k] += p.x_plus[k];
  }
  // E[c^2] = M^2 / 3, so the per-element mean has std sqrt(M^2 / 3 / n).
  const double sigma = std::sqrt(0.01 / 3.0 / n);
  for (int64_t k = 0; k < acc.size(); ++k) EXPECT_LT(std::abs(acc[k] / n - 0.5), 4.0 * sigma);
}

TEST(Dequantize, SupportAndSeedDependence) {
  Tensor x(Shape{1, 3, 16, 16});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 256) / 255.0;
  Rng a(1), b(2);
  const Tensor da = dequantize(x, a), db = dequantize(x, b);
  for (int64_t i = 0; i < x.size(); ++i) {
    ASSERT_GE(da[i] - x[i], 0.0);
    ASSERT_LT(da[i] - x[i], 1.0 / 256.0);
  }
  EXPECT_NE(da.vec(), db.vec());
}

TEST(InferenceCondition, AlwaysZero) {
  const NoiseSample z = inference_condition(Shape{2, 3, 8, 8}, Shape{2, 3, 2, 2});
  EXPECT_EQ(z.v.shape(), (Shape{2, 3, 8, 8}));
  EXPECT_EQ(z.w.shape(), (Shape{2, 3, 2, 2}));
  for (double v : z.v.values()) ASSERT_EQ(v, 0.0);
  for (double v : z.w.values()) ASSERT_EQ(v, 0.0);
  for (double c : z.c) ASSERT_EQ(c, 0.0);
}

TEST(InferenceCondition, SamplingMatchesManuallyZeroedNoise) {
  ModelConfig c;
  c.scale = 2;
  c.levels = 2;
  c.flow_steps = 1;
  c.ncl_blocks = {1};
  c.encoder_blocks = 1;
  c.encoder_width = 8;
  c.coupling_hidden = 8;
  Rng build(1);
  auto m = NcsrModel::build(c, build);
  const Tensor x = oracle::random_tensor(Shape{1, 3, 8, 8}, 3, 0.0, 1.0);
  const Tensor y = bicubic_resize(x, 1, 2);
  const NoiseSample z = inference_condition(x.shape(), y.shape());
  NoiseSample manual;
  manual.v = Tensor(x.shape());
  manual.c = {0.0};
  EXPECT_EQ(m->nll(x, y, z.cond()).nats.vec(), m->nll(x, y, manual.cond()).nats.vec());
  EXPECT_EQ(m->nll(x, y, z.cond()).nats.vec(), m->nll(x, y, {}).nats.vec());
}
