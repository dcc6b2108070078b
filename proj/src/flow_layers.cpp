#include "ncsr/flow_layers.hpp"

#include <cmath>
#include <numbers>

#include "ncsr/linalg.hpp"

namespace ncsr {

namespace {

void check_aligned(const Var& h, const Var& c, const char* what) {
  if (!c.defined()) throw Error(ErrorKind::kInvalidArgument, std::string(what) + ": missing conditioning tensor");
  const Shape a = h.shape(), b = c.shape();
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw ShapeError(std::string(what) + ": conditioning " + b.str() + " not aligned with activation " + a.str());
  }
}

Var plane_scalar(const Var& scalar_sum, const Shape& s) {
  return broadcast_batch(scale(scalar_sum, static_cast<double>(s.plane())), s.n);
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

FlowState FlowState::start(const Var& h) {
  return FlowState{h, Var::constant(Tensor(Shape{h.shape().n, 1, 1, 1}))};
}

Rng structural_rng(const std::string& name) { return Rng(fnv1a(name) ^ 0x5eed5eed5eed5eedULL); }

Conv::Conv(int64_t cin, int64_t cout, int k, int stride_, const std::string& name, bool zero_init)
    : stride(stride_), pad(k / 2) {
  Tensor w(Shape{cout, cin, k, k});
  if (!zero_init) {
    Rng rng = structural_rng(name);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
    for (double& v : w.values()) v = bound * (2.0 * rng.uniform() - 1.0);
  }
  weight = Var::parameter(std::move(w));
  bias = Var::parameter(Tensor(Shape{1, cout, 1, 1}));
}

void Conv::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

AffineNet::AffineNet(int64_t cin, int64_t cout, int64_t hidden, double bound, const std::string& name)
    : body_(cin, hidden, 3, 1, name + ".body", false),
      head_(hidden, 2 * cout, 3, 1, name + ".head", true),
      cout_(cout),
      bound_(bound) {}

std::pair<Var, Var> AffineNet::operator()(const Var& x) const {
  Var out = head_(relu(body_(x)));
  return {bounded(slice_channels(out, 0, cout_), bound_), slice_channels(out, cout_, cout_)};
}

void AffineNet::collect(const std::string& prefix, ParamList& out) {
  body_.collect(prefix + ".body", out);
  head_.collect(prefix + ".head", out);
}

// ---------------------------------------------------------------- actnorm

ActNorm::ActNorm(int64_t channels)
    : scale(Var::parameter(Tensor(Shape{1, channels, 1, 1}, 1.0))),
      shift(Var::parameter(Tensor(Shape{1, channels, 1, 1}, 0.0))) {}

FlowState ActNorm::forward(const FlowState& s, const ConditioningBundle&) const {
  Var h = channel_affine(s.h, scale, shift);
  return {h, add(s.logdet, plane_scalar(sum_log_abs(scale), s.h.shape()))};
}

FlowState ActNorm::inverse(const FlowState& s, const ConditioningBundle&) const {
  Var h = channel_affine_inverse(s.h, scale, shift);
  return {h, sub(s.logdet, plane_scalar(sum_log_abs(scale), s.h.shape()))};
}

void ActNorm::data_init(const FlowState& s, const ConditioningBundle&) {
  const Tensor& h = s.h.value();
  const Shape sh = h.shape();
  const int64_t hw = sh.plane();
  const double count = static_cast<double>(sh.n * hw);
  for (int64_t c = 0; c < sh.c; ++c) {
    double m = 0.0;
    for (int64_t n = 0; n < sh.n; ++n)
      for (int64_t i = 0; i < hw; ++i) m += h[(n * sh.c + c) * hw + i];
    m /= count;
    double var = 0.0;
    for (int64_t n = 0; n < sh.n; ++n)
      for (int64_t i = 0; i < hw; ++i) {
        const double d = h[(n * sh.c + c) * hw + i] - m;
        var += d * d;
      }
    const double sd = std::sqrt(var / count);
    shift.mutable_value()[c] = -m;
    scale.mutable_value()[c] = sd > 1e-6 ? 1.0 / sd : 1.0;
  }
}

void ActNorm::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".scale", &scale});
  out.push_back({prefix + ".shift", &shift});
}

// ---------------------------------------------------------------- 1x1 conv

InvConv1x1::InvConv1x1(int64_t channels, Rng& rng)
    : weight(Var::parameter(random_orthogonal(static_cast<int>(channels), rng).to_conv_weight())) {}

FlowState InvConv1x1::forward(const FlowState& s, const ConditioningBundle&) const {
  Var h = conv2d(s.h, weight, Var(), 1, 0);
  return {h, add(s.logdet, plane_scalar(log_abs_det(weight), s.h.shape()))};
}

FlowState InvConv1x1::inverse(const FlowState& s, const ConditioningBundle&) const {
  const LogDetInverse ldi = logdet_and_inverse(SquareMatrix::from_conv_weight(weight.value()));
  Var h = conv2d(s.h, Var::constant(ldi.inverse.to_conv_weight()), Var(), 1, 0);
  Var ld = Var::constant(Tensor(Shape{s.h.shape().n, 1, 1, 1}, ldi.log_abs_det * s.h.shape().plane()));
  return {h, sub(s.logdet, ld)};
}

void InvConv1x1::collect(const std::string& prefix, ParamList& out) { out.push_back({prefix + ".weight", &weight}); }

// ---------------------------------------------------------------- injector

AffineInjector::AffineInjector(int64_t channels, int64_t cond_channels, int64_t hidden, double bound,
                               const std::string& name)
    : net(cond_channels, channels, hidden, bound, name + ".net") {}

FlowState AffineInjector::forward(const FlowState& s, const ConditioningBundle& cond) const {
  check_aligned(s.h, cond.u, "affine injector");
  auto [logs, shift] = net(cond.u);
  Var h = add(mul(exp(logs), s.h), shift);
  return {h, add(s.logdet, sum_per_sample(logs))};
}

FlowState AffineInjector::inverse(const FlowState& s, const ConditioningBundle& cond) const {
  check_aligned(s.h, cond.u, "affine injector");
  auto [logs, shift] = net(cond.u);
  Var h = mul(sub(s.h, shift), exp(neg(logs)));
  return {h, sub(s.logdet, sum_per_sample(logs))};
}

void AffineInjector::collect(const std::string& prefix, ParamList& out) { net.collect(prefix + ".net", out); }

// ---------------------------------------------------------------- coupling

namespace {
int64_t extra_channels(CondMode mode, int64_t noise_channels) {
  switch (mode) {
    case CondMode::kLrOnly: return 0;
    case CondMode::kLrAndNoise: return noise_channels;
    case CondMode::kLrAndStd: return 1;
  }
  return 0;
}
}  // namespace

CondAffineCoupling::CondAffineCoupling(int64_t channels, int64_t cond_channels, CondMode mode,
                                       int64_t noise_channels, int64_t hidden, double bound,
                                       const std::string& name)
    : channels_(channels), ca_((channels + 1) / 2), mode_(mode) {
  if (channels < 2) throw ShapeError("coupling needs at least 2 channels, got " + std::to_string(channels));
  net = AffineNet(ca_ + cond_channels + extra_channels(mode, noise_channels), channels - ca_, hidden, bound,
                  name + ".net");
}

Var CondAffineCoupling::net_input(const Var& a, const ConditioningBundle& cond) const {
  check_aligned(a, cond.u, "coupling");
  switch (mode_) {
    case CondMode::kLrOnly: {
      const Var parts[] = {a, cond.u};
      return concat_channels(parts);
    }
    case CondMode::kLrAndNoise: {
      if (!cond.v_sq.defined()) {
        throw Error(ErrorKind::kInvalidArgument, "noise conditional coupling: noise tensor v is missing");
      }
      check_aligned(a, cond.v_sq, "noise conditional coupling");
      const Var parts[] = {a, cond.u, cond.v_sq};
      return concat_channels(parts);
    }
    case CondMode::kLrAndStd: {
      if (!cond.c_map.defined()) {
        throw Error(ErrorKind::kInvalidArgument, "std conditional coupling: std map is missing");
      }
      check_aligned(a, cond.c_map, "std conditional coupling");
      const Var parts[] = {a, cond.u, cond.c_map};
      return concat_channels(parts);
    }
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown conditioning mode");
}

FlowState CondAffineCoupling::forward(const FlowState& s, const ConditioningBundle& cond) const {
  if (s.h.shape().c != channels_) {
    throw ShapeError("coupling built for " + std::to_string(channels_) + " channels, got " + s.h.shape().str());
  }
  Var a = slice_channels(s.h, 0, ca_);
  Var b = slice_channels(s.h, ca_, channels_ - ca_);
  auto [logs, shift] = net(net_input(a, cond));
  const Var parts[] = {a, add(mul(exp(logs), b), shift)};
  return {concat_channels(parts), add(s.logdet, sum_per_sample(logs))};
}

FlowState CondAffineCoupling::inverse(const FlowState& s, const ConditioningBundle& cond) const {
  if (s.h.shape().c != channels_) {
    throw ShapeError("coupling built for " + std::to_string(channels_) + " channels, got " + s.h.shape().str());
  }
  Var a = slice_channels(s.h, 0, ca_);
  Var b = slice_channels(s.h, ca_, channels_ - ca_);
  auto [logs, shift] = net(net_input(a, cond));
  const Var parts[] = {a, mul(sub(b, shift), exp(neg(logs)))};
  return {concat_channels(parts), sub(s.logdet, sum_per_sample(logs))};
}

void CondAffineCoupling::collect(const std::string& prefix, ParamList& out) { net.collect(prefix + ".net", out); }

// ---------------------------------------------------------------- squeeze

FlowState squeeze(const FlowState& s) { return {squeeze2(s.h), s.logdet}; }
FlowState unsqueeze(const FlowState& s) { return {unsqueeze2(s.h), s.logdet}; }

// ---------------------------------------------------------------- split

Split::Split(int64_t channels, int64_t cond_channels, bool standard_normal, const std::string& name)
    : channels_(channels), standard_normal_(standard_normal) {
  if (channels % 2 != 0) throw ShapeError("split needs an even channel count, got " + std::to_string(channels));
  prior = Conv(channels / 2 + cond_channels, channels, 3, 1, name + ".prior", true);
}

std::pair<Var, Var> Split::prior_params(const Var& kept, const Var& u) const {
  const int64_t half = channels_ / 2;
  if (standard_normal_) {
    Shape s = kept.shape();
    return {Var::constant(Tensor(s)), Var::constant(Tensor(s))};
  }
  check_aligned(kept, u, "split prior");
  const Var parts[] = {kept, u};
  Var out = prior(concat_channels(parts));
  return {slice_channels(out, 0, half), slice_channels(out, half, half)};
}

Split::Result Split::forward(const FlowState& s, const Var& u) const {
  if (s.h.shape().c != channels_) {
    throw ShapeError("split built for " + std::to_string(channels_) + " channels, got " + s.h.shape().str());
  }
  const int64_t half = channels_ / 2;
  Var kept = slice_channels(s.h, 0, half);
  Var z = slice_channels(s.h, half, half);
  auto [m, logs] = prior_params(kept, u);
  return {FlowState{kept, s.logdet}, z, gaussian_log_density(z, m, logs)};
}

FlowState Split::inverse(const FlowState& s, const Var& u, const std::optional<Tensor>& z, double temperature,
                         Rng* rng, Tensor* drawn) const {
  const int64_t half = channels_ / 2;
  if (s.h.shape().c != half) {
    throw ShapeError("split inverse expects " + std::to_string(half) + " channels, got " + s.h.shape().str());
  }
  auto [m, logs] = prior_params(s.h, u);
  Tensor zt;
  if (z) {
    check_same_shape(*z, m.value(), "split inverse latent");
    zt = *z;
  } else {
    require(rng != nullptr, "split inverse: an Rng is required to draw latents");
    require(temperature >= 0.0, "split inverse: temperature must be >= 0");
    zt = Tensor(m.shape());
    for (int64_t i = 0; i < zt.size(); ++i) {
      const double eps = rng->normal();
      zt[i] = m.value()[i] + temperature * std::exp(logs.value()[i]) * eps;
    }
  }
  if (drawn) *drawn = zt;
  const Var parts[] = {s.h, Var::constant(std::move(zt))};
  return {concat_channels(parts), s.logdet};
}

void Split::collect(const std::string& prefix, ParamList& out) { prior.collect(prefix + ".prior", out); }

Var gaussian_log_density(const Var& z, const Var& mean, const Var& log_std) {
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
  Var t = mul(sub(z, mean), exp(neg(log_std)));
  Var per = add_scalar(neg(add(scale(square(t), 0.5), log_std)), -kHalfLog2Pi);
  return sum_per_sample(per);
}

Var standard_normal_log_density(const Var& z) {
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
  return sum_per_sample(add_scalar(scale(square(z), -0.5), -kHalfLog2Pi));
}

}  // namespace ncsr
