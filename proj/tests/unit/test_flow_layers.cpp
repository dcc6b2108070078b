#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ncsr/flow_layers.hpp"
#include "ncsr/linalg.hpp"
#include "oracles.hpp"

using namespace ncsr;

namespace {

FlowState state_of(const Tensor& t) { return FlowState::start(Var::constant(t)); }

void randomize(FlowLayer& layer, uint64_t seed, double mag = 0.3) {
  ParamList ps;
  layer.collect("layer", ps);
  uint64_t s = seed;
  for (const NamedParam& p : ps) {
    const Tensor noise = oracle::random_tensor(p.var->shape(), ++s, -mag, mag);
    Tensor& v = p.var->mutable_value();
    for (int64_t i = 0; i < v.size(); ++i) v[i] += noise[i];
  }
}

ConditioningBundle random_cond(int64_t n, int64_t cu, int64_t noise_ch, int64_t h, int64_t w, uint64_t seed) {
  ConditioningBundle c;
  c.u = Var::constant(oracle::random_tensor(Shape{n, cu, h, w}, seed));
  if (noise_ch > 0) c.v_sq = Var::constant(oracle::random_tensor(Shape{n, noise_ch, h, w}, seed + 1, -0.1, 0.1));
  c.c_map = Var::constant(Tensor(Shape{n, 1, h, w}, 0.05));
  return c;
}

double jacobian_logdet(const FlowLayer& layer, const ConditioningBundle& cond, const Tensor& x) {
  auto f = [&](const Tensor& t) {
    NoGradGuard g;
    return layer.forward(state_of(t), cond).h.value();
  };
  return oracle::elimination_log_abs_det(oracle::fd_jacobian(f, x));
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

// ---- actnorm

TEST(ActNorm, UnitScaleZeroShiftIsIdentity) {
  ActNorm an(3);
  const Tensor x = oracle::random_tensor(Shape{2, 3, 2, 2}, 1);
  const FlowState out = an.forward(state_of(x), {});
  EXPECT_EQ(out.h.value().vec(), x.vec());
  EXPECT_EQ(out.logdet.value()[0], 0.0);
}

TEST(ActNorm, ScaleTwoLogdet) {
  ActNorm an(1);
  an.scale.mutable_value()[0] = 2.0;
  const FlowState out = an.forward(state_of(Tensor(Shape{1, 1, 2, 2}, 1.0)), {});
  EXPECT_NEAR(out.logdet.value()[0], 4.0 * std::log(2.0), 1e-15);
  EXPECT_EQ(out.h.value()[3], 2.0);
}

TEST(ActNorm, DataInitNormalisesBatch) {
  ActNorm an(4);
  Tensor x = oracle::random_tensor(Shape{3, 4, 5, 5}, 2);
  for (int64_t i = 0; i < x.size(); ++i) x[i] = 3.0 * x[i] + 1.5;
  an.data_init(state_of(x), {});
  const Tensor y = an.forward(state_of(x), {}).h.value();
  for (int64_t c = 0; c < 4; ++c) {
    double m = 0.0, s = 0.0;
    int cnt = 0;
    for (int64_t n = 0; n < 3; ++n)
      for (int64_t i = 0; i < 25; ++i, ++cnt) m += y[(n * 4 + c) * 25 + i];
    m /= cnt;
    for (int64_t n = 0; n < 3; ++n)
      for (int64_t i = 0; i < 25; ++i) s += std::pow(y[(n * 4 + c) * 25 + i] - m, 2);
    EXPECT_LT(std::abs(m), 1e-6);
    EXPECT_NEAR(std::sqrt(s / cnt), 1.0, 1e-6);
  }
}

TEST(ActNorm, ZeroScaleRejected) {
  ActNorm an(2);
  an.scale.mutable_value()[1] = 0.0;
  EXPECT_THROW(an.forward(state_of(Tensor(Shape{1, 2, 1, 1})), {}), Error);
}

// ---- 1x1 convolution

TEST(InvConv1x1, IdentityWeight) {
  Rng rng(1);
  InvConv1x1 conv(3, rng);
  conv.weight.mutable_value() = SquareMatrix::identity(3).to_conv_weight();
  const Tensor x = oracle::random_tensor(Shape{1, 3, 2, 2}, 3);
  const FlowState out = conv.forward(state_of(x), {});
  EXPECT_EQ(out.h.value().vec(), x.vec());
  EXPECT_EQ(out.logdet.value()[0], 0.0);
}

TEST(InvConv1x1, RotationHasZeroLogdet) {
  Rng rng(1);
  InvConv1x1 conv(2, rng);
  const double th = 0.3;
  SquareMatrix r(2);
  r(0, 0) = std::cos(th);
  r(0, 1) = -std::sin(th);
  r(1, 0) = std::sin(th);
  r(1, 1) = std::cos(th);
  conv.weight.mutable_value() = r.to_conv_weight();
  const Tensor x(Shape{1, 2, 1, 1}, {1.0, 0.0});
  const FlowState out = conv.forward(state_of(x), {});
  EXPECT_NEAR(out.logdet.value()[0], 0.0, 1e-15);
  EXPECT_NEAR(out.h.value()[0], std::cos(th), 1e-15);
  EXPECT_NEAR(out.h.value()[1], std::sin(th), 1e-15);
}

TEST(InvConv1x1, LogdetMatchesTwelveByTwelveJacobian) {
  Rng rng(5);
  InvConv1x1 conv(3, rng);
  randomize(conv, 9, 0.5);
  const Tensor x = oracle::random_tensor(Shape{1, 3, 2, 2}, 4);
  const double analytic = conv.forward(state_of(x), {}).logdet.value()[0];
  EXPECT_NEAR(analytic, jacobian_logdet(conv, {}, x), 1e-8);
}

TEST(InvConv1x1, SingularWeightRejected) {
  Rng rng(1);
  InvConv1x1 conv(2, rng);
  conv.weight.mutable_value() = Tensor(Shape{2, 2, 1, 1}, {1, 2, 2, 4});
  EXPECT_THROW(conv.forward(state_of(Tensor(Shape{1, 2, 1, 1})), {}), SingularError);
}

// ---- affine injector

TEST(AffineInjector, ZeroNetsIsIdentity) {
  AffineInjector inj(2, 3, 4, 2.0, "t.inj");
  const auto cond = random_cond(1, 3, 0, 2, 2, 1);
  const Tensor x = oracle::random_tensor(Shape{1, 2, 2, 2}, 2);
  const FlowState out = inj.forward(state_of(x), cond);
  EXPECT_EQ(out.h.value().vec(), x.vec());
  EXPECT_EQ(out.logdet.value()[0], 0.0);
}

TEST(AffineInjector, ConstantScaleAndShift) {
  AffineInjector inj(1, 1, 2, 2.0, "t.inj");
  // Zero head weights, biases chosen so bounded(log-scale) = log 2 and shift = 1.
  Tensor& bias = inj.net.head().bias.mutable_value();
  bias[0] = logit((1.0 + std::log(2.0) / 2.0) / 2.0);
  bias[1] = 1.0;
  ConditioningBundle cond;
  cond.u = Var::constant(Tensor(Shape{1, 1, 1, 1}, 0.4));
  const FlowState out = inj.forward(state_of(Tensor(Shape{1, 1, 1, 1}, 3.0)), cond);
  EXPECT_NEAR(out.h.value()[0], 7.0, 1e-12);
  EXPECT_NEAR(out.logdet.value()[0], std::log(2.0), 1e-12);
}

TEST(AffineInjector, MisalignedConditioningRejected) {
  AffineInjector inj(2, 3, 4, 2.0, "t.inj");
  const auto cond = random_cond(1, 3, 0, 4, 4, 1);
  EXPECT_THROW(inj.forward(state_of(Tensor(Shape{1, 2, 2, 2})), cond), ShapeError);
}

// ---- couplings

TEST(Coupling, ZeroNetsIsIdentity) {
  CondAffineCoupling cp(4, 3, CondMode::kLrOnly, 0, 4, 2.0, "t.cp");
  const auto cond = random_cond(2, 3, 0, 2, 2, 3);
  const Tensor x = oracle::random_tensor(Shape{2, 4, 2, 2}, 5);
  const FlowState out = cp.forward(state_of(x), cond);
  EXPECT_EQ(out.h.value().vec(), x.vec());
  EXPECT_EQ(out.logdet.value()[0], 0.0);
}

TEST(Coupling, PassThroughHalfIsBitwise) {
  for (CondMode mode : {CondMode::kLrOnly, CondMode::kLrAndNoise, CondMode::kLrAndStd}) {
    CondAffineCoupling cp(5, 3, mode, 2, 4, 2.0, "t.cp");
    randomize(cp, 11);
    const auto cond = random_cond(2, 3, 2, 3, 3, 7);
    const Tensor x = oracle::random_tensor(Shape{2, 5, 3, 3}, 8);
    const Tensor y = cp.forward(state_of(x), cond).h.value();
    ASSERT_EQ(cp.a_channels(), 3);
    for (int64_t n = 0; n < 2; ++n)
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t i = 0; i < 3; ++i)
          for (int64_t j = 0; j < 3; ++j) ASSERT_EQ(y.at(n, c, i, j), x.at(n, c, i, j));
  }
}

TEST(Coupling, ZeroNoiseWeightsMatchLrOnly) {
  CondAffineCoupling lr(4, 3, CondMode::kLrOnly, 0, 5, 2.0, "t.lr");
  CondAffineCoupling ncl(4, 3, CondMode::kLrAndNoise, 2, 5, 2.0, "t.ncl");
  randomize(lr, 21);
  // Copy the LR-only weights into the matching input channels; noise inputs get zero weight.
  const Tensor& wl = lr.net.body().weight.value();
  Tensor& wn = ncl.net.body().weight.mutable_value();
  wn.fill(0.0);
  const Shape sl = wl.shape();
  for (int64_t o = 0; o < sl.n; ++o)
    for (int64_t c = 0; c < sl.c; ++c)
      for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 3; ++j) wn.at(o, c, i, j) = wl.at(o, c, i, j);
  ncl.net.body().bias.mutable_value() = lr.net.body().bias.value();
  ncl.net.head().weight.mutable_value() = lr.net.head().weight.value();
  ncl.net.head().bias.mutable_value() = lr.net.head().bias.value();

  const auto cond = random_cond(1, 3, 2, 2, 2, 4);
  const Tensor x = oracle::random_tensor(Shape{1, 4, 2, 2}, 6);
  const FlowState a = lr.forward(state_of(x), cond), b = ncl.forward(state_of(x), cond);
  EXPECT_LT(max_abs_diff(a.h.value(), b.h.value()), 1e-13);
  EXPECT_NEAR(a.logdet.value()[0], b.logdet.value()[0], 1e-13);
}

TEST(Coupling, NoiseModeJacobianAndRoundTrip) {
  CondAffineCoupling cp(2, 3, CondMode::kLrAndNoise, 2, 4, 2.0, "t.cp");
  randomize(cp, 31, 0.5);
  const auto cond = random_cond(1, 3, 2, 2, 2, 9);
  const Tensor x = oracle::random_tensor(Shape{1, 2, 2, 2}, 10);
  const FlowState fwd = cp.forward(state_of(x), cond);
  EXPECT_NEAR(fwd.logdet.value()[0], jacobian_logdet(cp, cond, x), 1e-8);
  const FlowState back = cp.inverse(fwd, cond);
  EXPECT_LT(max_abs_diff(back.h.value(), x), 1e-10);
  EXPECT_NEAR(back.logdet.value()[0], 0.0, 1e-12);
}

TEST(Coupling, Errors) {
  EXPECT_THROW(CondAffineCoupling(1, 3, CondMode::kLrOnly, 0, 4, 2.0, "t"), ShapeError);
  CondAffineCoupling cp(2, 3, CondMode::kLrAndNoise, 2, 4, 2.0, "t.cp");
  ConditioningBundle cond = random_cond(1, 3, 0, 2, 2, 1);
  cond.v_sq = Var();
  EXPECT_THROW(cp.forward(state_of(Tensor(Shape{1, 2, 2, 2})), cond), Error);
}

// ---- every layer: round trips, Jacobians, purity

namespace {

std::vector<std::unique_ptr<FlowLayer>> all_layers(int64_t c, Rng& rng) {
  std::vector<std::unique_ptr<FlowLayer>> v;
  v.push_back(std::make_unique<ActNorm>(c));
  v.push_back(std::make_unique<InvConv1x1>(c, rng));
  v.push_back(std::make_unique<AffineInjector>(c, 3, 4, 2.0, "a.inj"));
  v.push_back(std::make_unique<CondAffineCoupling>(c, 3, CondMode::kLrOnly, 0, 4, 2.0, "a.lr"));
  v.push_back(std::make_unique<CondAffineCoupling>(c, 3, CondMode::kLrAndNoise, 2, 4, 2.0, "a.ncl"));
  v.push_back(std::make_unique<CondAffineCoupling>(c, 3, CondMode::kLrAndStd, 1, 4, 2.0, "a.std"));
  uint64_t seed = 100;
  for (auto& l : v) randomize(*l, seed += 10, 0.4);
  return v;
}

}  // namespace

TEST(FlowLayers, RoundTripBothDirections) {
  Rng rng(2);
  auto layers = all_layers(3, rng);
  const auto cond = random_cond(2, 3, 2, 3, 3, 12);
  for (size_t k = 0; k < layers.size(); ++k) {
    const Tensor x = oracle::random_tensor(Shape{2, 3, 3, 3}, 40 + k);
    const FlowState f = layers[k]->forward(state_of(x), cond);
    EXPECT_LT(max_abs_diff(layers[k]->inverse(f, cond).h.value(), x), 1e-9) << layers[k]->kind();
    const FlowState g = layers[k]->inverse(state_of(x), cond);
    EXPECT_LT(max_abs_diff(layers[k]->forward(g, cond).h.value(), x), 1e-9) << layers[k]->kind();
    EXPECT_NEAR(layers[k]->forward(g, cond).logdet.value()[0], 0.0, 1e-12);
  }
}

TEST(FlowLayers, LogdetMatchesFullJacobianAtSixteenDims) {
  Rng rng(3);
  auto layers = all_layers(4, rng);
  const auto cond = random_cond(1, 3, 2, 2, 2, 13);
  for (size_t k = 0; k < layers.size(); ++k) {
    const Tensor x = oracle::random_tensor(Shape{1, 4, 2, 2}, 60 + k);
    const double analytic = layers[k]->forward(state_of(x), cond).logdet.value()[0];
    EXPECT_NEAR(analytic, jacobian_logdet(*layers[k], cond, x), 1e-7) << layers[k]->kind();
  }
}

TEST(FlowLayers, ChainLogdetIsSumOfParts) {
  Rng rng(4);
  auto layers = all_layers(4, rng);
  const auto cond = random_cond(1, 3, 2, 2, 2, 14);
  const Tensor x = oracle::random_tensor(Shape{1, 4, 2, 2}, 77);
  FlowState chain = state_of(x);
  double parts = 0.0;
  for (auto& l : layers) {
    parts += l->forward(state_of(chain.h.value()), cond).logdet.value()[0];
    chain = l->forward(chain, cond);
  }
  EXPECT_NEAR(chain.logdet.value()[0], parts, 1e-12);
}

TEST(FlowLayers, ConditioningIsNeverMutated) {
  Rng rng(5);
  auto layers = all_layers(4, rng);
  const auto cond = random_cond(1, 3, 2, 2, 2, 15);
  const Tensor u = cond.u.value(), v = cond.v_sq.value(), c = cond.c_map.value();
  const Tensor x = oracle::random_tensor(Shape{1, 4, 2, 2}, 88);
  for (auto& l : layers) l->inverse(l->forward(state_of(x), cond), cond);
  EXPECT_EQ(cond.u.value().vec(), u.vec());
  EXPECT_EQ(cond.v_sq.value().vec(), v.vec());
  EXPECT_EQ(cond.c_map.value().vec(), c.vec());
}

// ---- squeeze and split

TEST(Squeeze, StateRoundTripKeepsLogdet) {
  const Tensor x = oracle::random_tensor(Shape{2, 3, 6, 4}, 1);
  FlowState s = state_of(x);
  s.logdet = Var::constant(Tensor(Shape{2, 1, 1, 1}, 0.25));
  const FlowState q = squeeze(s);
  EXPECT_EQ(q.h.shape(), (Shape{2, 12, 3, 2}));
  EXPECT_EQ(q.h.value().size(), x.size());
  EXPECT_EQ(q.logdet.value()[0], 0.25);
  EXPECT_EQ(unsqueeze(q).h.value().vec(), x.vec());
}

TEST(Split, ZeroPriorIsStandardNormal) {
  Split sp(4, 3, false, "t.split");
  const Tensor x = oracle::random_tensor(Shape{1, 4, 2, 2}, 3);
  const Var u = Var::constant(oracle::random_tensor(Shape{1, 3, 2, 2}, 4));
  const auto r = sp.forward(state_of(x), u);
  double want = 0.0;
  for (int64_t c = 2; c < 4; ++c)
    for (int64_t i = 0; i < 2; ++i)
      for (int64_t j = 0; j < 2; ++j) {
        const double z = x.at(0, c, i, j);
        want += -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
      }
  EXPECT_NEAR(r.logp.value()[0], want, 1e-12);
  EXPECT_EQ(r.state.h.shape(), (Shape{1, 2, 2, 2}));
}

TEST(Split, RecordedLatentRestoresInputExactly) {
  Split sp(4, 3, false, "t.split");
  ParamList ps;
  sp.collect("s", ps);
  ps[0].var->mutable_value() = oracle::random_tensor(ps[0].var->shape(), 5, -0.3, 0.3);
  const Tensor x = oracle::random_tensor(Shape{2, 4, 2, 2}, 6);
  const Var u = Var::constant(oracle::random_tensor(Shape{2, 3, 2, 2}, 7));
  const auto r = sp.forward(state_of(x), u);
  EXPECT_EQ(sp.inverse(r.state, u, r.z.value(), 0.0, nullptr).h.value().vec(), x.vec());
}

TEST(Split, ZeroTemperatureDrawsPriorMean) {
  Split sp(4, 3, false, "t.split");
  ParamList ps;
  sp.collect("s", ps);
  ps[1].var->mutable_value() = oracle::random_tensor(ps[1].var->shape(), 8);
  const Tensor kept = oracle::random_tensor(Shape{1, 2, 2, 2}, 9);
  const Var u = Var::constant(Tensor(Shape{1, 3, 2, 2}));
  Rng rng(1);
  Tensor drawn;
  const FlowState s = sp.inverse(state_of(kept), u, std::nullopt, 0.0, &rng, &drawn);
  // Prior conv weights are zero, so the mean is the bias of the first half.
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t i = 0; i < 4; ++i) EXPECT_EQ(drawn[c * 4 + i], ps[1].var->value()[c]);
  EXPECT_EQ(s.h.shape(), (Shape{1, 4, 2, 2}));
}

TEST(Split, OddChannelsRejected) { EXPECT_THROW(Split(3, 2, false, "t"), ShapeError); }
