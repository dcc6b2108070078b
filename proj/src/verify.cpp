#include "ncsr/verify.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "ncsr/linalg.hpp"
#include "ncsr/metrics.hpp"
#include "ncsr/resize.hpp"

namespace ncsr {

std::string format_property(const PropertyResult& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "measured=%.3e  tol=%.1e", r.measured, r.tolerance);
  std::string s = std::string(r.pass ? "PASS " : "FAIL ") + r.name + "  " + buf;
  if (!r.note.empty()) s += "  " + r.note;
  return s;
}

void perturb_parameters(NcsrModel& model, Rng& rng, double mag) {
  for (const NamedParam& p : model.parameters()) {
    Tensor& t = p.var->mutable_value();
    const bool is_scale = p.name.size() > 6 && p.name.ends_with(".scale");
    for (double& v : t.values()) {
      const double u = mag * (2.0 * rng.uniform() - 1.0);
      v = is_scale ? v * std::exp(u) : v + u;
    }
  }
}

std::vector<double> numeric_jacobian(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  const int64_t n_in = x.size();
  const Tensor f0 = f(x);
  const int64_t n_out = f0.size();
  std::vector<double> jac(static_cast<size_t>(n_out * n_in));
  Tensor xp = x;
  for (int64_t j = 0; j < n_in; ++j) {
    const double orig = xp[j];
    xp[j] = orig + h;
    const Tensor fp = f(xp);
    xp[j] = orig - h;
    const Tensor fm = f(xp);
    xp[j] = orig;
    for (int64_t i = 0; i < n_out; ++i) jac[static_cast<size_t>(i * n_in + j)] = (fp[i] - fm[i]) / (2.0 * h);
  }
  return jac;
}

double log_abs_det_dense(const std::vector<double>& m, int64_t n) {
  require(static_cast<int64_t>(m.size()) == n * n, "log_abs_det_dense: matrix is not n x n");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(m.data(), n, n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  double s = 0.0;
  const auto& u = lu.matrixLU();
  for (int64_t i = 0; i < n; ++i) s += std::log(std::abs(u(i, i)));
  return s;
}

namespace {

struct Suite {
  std::vector<PropertyResult> results;
  const std::function<void(const PropertyResult&)>* on_result;

  void add(std::string name, double measured, double tol, std::string note = {}) {
    PropertyResult r{std::move(name), measured, tol, std::isfinite(measured) && measured <= tol, std::move(note)};
    results.push_back(r);
    if (*on_result) (*on_result)(r);
  }
  void fail(std::string name, double tol, std::string note) {
    PropertyResult r{std::move(name), std::nan(""), tol, false, std::move(note)};
    results.push_back(r);
    if (*on_result) (*on_result)(r);
  }
  template <typename F>
  void check(const std::string& name, double tol, F&& f) {
    try {
      const auto [measured, note] = f();
      add(name, measured, tol, note);
    } catch (const std::exception& e) {
      fail(name, tol, std::string("error: ") + e.what());
    }
  }
};

using Note = std::pair<double, std::string>;

Tensor rand_tensor(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) { return uniform(rng, s, lo, hi); }

void perturb_list(ParamList params, Rng& rng, double mag) {
  for (const NamedParam& p : params) {
    const bool is_scale = p.name.ends_with(".scale");
    for (double& v : p.var->mutable_value().values()) {
      const double u = mag * (2.0 * rng.uniform() - 1.0);
      v = is_scale ? v * std::exp(u) : v + u;
    }
  }
}

struct LayerCase {
  std::string name;
  std::unique_ptr<FlowLayer> layer;
  Shape in;
  ConditioningBundle cond;
};

std::vector<LayerCase> layer_cases(Rng& rng, int64_t c, int64_t h, int64_t w, int64_t n) {
  const int64_t cu = 3;
  ConditioningBundle cond;
  cond.u = Var::constant(rand_tensor(rng, Shape{n, cu, h, w}));
  cond.v_sq = Var::constant(rand_tensor(rng, Shape{n, 2, h, w}, -0.1, 0.1));
  cond.c_map = Var::constant(rand_tensor(rng, Shape{n, 1, h, w}, 0.0, 0.1));
  std::vector<LayerCase> out;
  Shape in{n, c, h, w};
  out.push_back({"actnorm", std::make_unique<ActNorm>(c), in, cond});
  out.push_back({"conv1x1", std::make_unique<InvConv1x1>(c, rng), in, cond});
  out.push_back({"injector", std::make_unique<AffineInjector>(c, cu, 4, 2.0, "verify.injector"), in, cond});
  out.push_back({"lr_coupling",
                 std::make_unique<CondAffineCoupling>(c, cu, CondMode::kLrOnly, 0, 4, 2.0, "verify.lr"), in, cond});
  out.push_back({"ncl_coupling",
                 std::make_unique<CondAffineCoupling>(c, cu, CondMode::kLrAndNoise, 2, 4, 2.0, "verify.ncl"), in,
                 cond});
  out.push_back({"std_coupling",
                 std::make_unique<CondAffineCoupling>(c, cu, CondMode::kLrAndStd, 1, 4, 2.0, "verify.std"), in, cond});
  for (auto& lc : out) {
    ParamList ps;
    lc.layer->collect(lc.name, ps);
    perturb_list(ps, rng, 0.3);
  }
  return out;
}

void layer_properties(Suite& s, Rng& rng, const VerifyOptions& opt) {
  auto cases = layer_cases(rng, 2, 2, 2, 1);
  if (opt.inject_singular_1x1) {
    auto* conv = static_cast<InvConv1x1*>(cases[1].layer.get());
    Tensor& wt = conv->weight.mutable_value();
    wt[2] = wt[0];
    wt[3] = wt[1];
  }
  NoGradGuard guard;
  for (auto& lc : cases) {
    s.check("round_trip." + lc.name, 1e-9, [&]() -> Note {
      const Tensor x = rand_tensor(rng, lc.in);
      const FlowState fwd = lc.layer->forward(FlowState::start(Var::constant(x)), lc.cond);
      const FlowState back = lc.layer->inverse(fwd, lc.cond);
      const double ld = std::abs(back.logdet.value()[0]);
      return {std::max(max_abs_diff(back.h.value(), x), ld), {}};
    });
    s.check("logdet_vs_jacobian." + lc.name, 1e-7, [&]() -> Note {
      const Tensor x = rand_tensor(rng, lc.in);
      auto f = [&](const Tensor& t) { return lc.layer->forward(FlowState::start(Var::constant(t)), lc.cond).h.value(); };
      const double analytic = lc.layer->forward(FlowState::start(Var::constant(x)), lc.cond).logdet.value()[0];
      const double brute = log_abs_det_dense(numeric_jacobian(f, x, 1e-5), x.size());
      return {std::abs(analytic - brute), {}};
    });
  }
  s.check("round_trip.squeeze", 0.0, [&]() -> Note {
    const Tensor x = rand_tensor(rng, Shape{2, 3, 4, 6});
    const FlowState back = unsqueeze(squeeze(FlowState::start(Var::constant(x))));
    return {max_abs_diff(back.h.value(), x), "bitwise"};
  });
  s.check("round_trip.split", 0.0, [&]() -> Note {
    Split split(4, 3, false, "verify.split");
    ParamList ps;
    split.collect("split", ps);
    perturb_list(ps, rng, 0.3);
    const Tensor x = rand_tensor(rng, Shape{1, 4, 2, 2});
    const Var u = Var::constant(rand_tensor(rng, Shape{1, 3, 2, 2}));
    const auto r = split.forward(FlowState::start(Var::constant(x)), u);
    const FlowState back = split.inverse(r.state, u, r.z.value(), 0.0, nullptr);
    return {max_abs_diff(back.h.value(), x), "bitwise"};
  });
}

ModelConfig tiny_config(Rng& rng, bool vary) {
  ModelConfig c;
  c.scale = 2;
  c.levels = 2;
  c.flow_steps = 1;
  c.encoder_blocks = 1;
  c.encoder_width = 4;
  c.coupling_hidden = 4;
  c.ncl_blocks = {1};
  if (vary) {
    const int scales[] = {2, 4};
    c.scale = scales[rng.below(2)];
    c.levels = 1 + static_cast<int>(rng.below(3));
    c.flow_steps = 1 + static_cast<int>(rng.below(2));
    const ConditioningVariant variants[] = {ConditioningVariant::kNoise, ConditioningVariant::kStd,
                                            ConditioningVariant::kNone};
    c.conditioning = variants[rng.below(3)];
    c.ncl_blocks.clear();
    for (int b = 1; b < c.levels; ++b) {
      if (rng.below(2) == 1) c.ncl_blocks.push_back(b);
    }
    c.standard_normal_prior = rng.below(4) == 0;
  }
  return c;
}

struct ModelInputs {
  Tensor x, y;
  NoiseCond noise;
};

ModelInputs random_inputs(const ModelConfig& c, Rng& rng, int64_t n) {
  const int64_t side = c.hr_multiple();
  ModelInputs in;
  in.x = rand_tensor(rng, Shape{n, 3, side, side}, 0.0, 1.0);
  in.y = bicubic_resize(in.x, 1, c.scale);
  in.noise.v = rand_tensor(rng, in.x.shape(), -0.05, 0.05);
  in.noise.c.assign(static_cast<size_t>(n), 0.05);
  return in;
}

void model_properties(Suite& s, Rng& rng, const VerifyOptions& opt) {
  const int configs = opt.full ? 50 : 5;
  s.check("model.round_trip", 1e-8, [&]() -> Note {
    double worst = 0.0;
    for (int i = 0; i < configs; ++i) {
      const ModelConfig c = tiny_config(rng, true);
      Rng init = rng.derive(static_cast<uint64_t>(i));
      auto m = NcsrModel::build(c, init);
      perturb_parameters(*m, init, 0.1);
      const ModelInputs in = random_inputs(c, rng, 2);
      NoGradGuard guard;
      const ForwardResult fr = m->forward(Var::constant(in.x), Var::constant(in.y), in.noise);
      std::vector<Tensor> z;
      for (const Var& v : fr.latents) z.push_back(v.value());
      worst = std::max(worst, max_abs_diff(m->reverse(z, in.y, in.noise), in.x));
    }
    return {worst, std::to_string(configs) + " configs"};
  });

  s.check("model.temperature0_deterministic", 0.0, [&]() -> Note {
    const ModelConfig c = tiny_config(rng, false);
    Rng init(opt.seed);
    auto m = NcsrModel::build(c, init);
    perturb_parameters(*m, init, 0.1);
    const ModelInputs in = random_inputs(c, rng, 1);
    Rng r1(1), r2(2);
    const auto a = m->sample(in.y, 0.0, r1, 2);
    const auto b = m->sample(in.y, 0.0, r2, 1);
    return {std::max(max_abs_diff(a[0], a[1]), max_abs_diff(a[0], b[0])), "bitwise"};
  });

  const int probes = opt.full ? 20 : 3;
  s.check("model.gradients", 1e-4, [&]() -> Note {
    const ModelConfig c = tiny_config(rng, false);
    Rng init(opt.seed + 1);
    auto m = NcsrModel::build(c, init);
    perturb_parameters(*m, init, 0.2);
    const ModelInputs in = random_inputs(c, rng, 1);
    ParamList params = m->parameters();
    for (const NamedParam& p : params) p.var->zero_grad();
    backward(m->nll(in.x, in.y, in.noise).loss);
    std::map<std::string, std::vector<const NamedParam*>> by_class;
    for (const NamedParam& p : params) by_class[NcsrModel::param_class(p.name)].push_back(&p);
    double worst = 0.0;
    int total = 0;
    NoGradGuard guard;
    for (auto& [cls, list] : by_class) {
      for (int k = 0; k < probes; ++k) {
        const NamedParam& p = *list[rng.below(list.size())];
        const int64_t idx = static_cast<int64_t>(rng.below(static_cast<uint64_t>(p.var->value().size())));
        const double analytic = p.var->grad()[idx];
        double& slot = p.var->mutable_value()[idx];
        const double orig = slot;
        const double h = 1e-5;
        slot = orig + h;
        const double lp = m->nll(in.x, in.y, in.noise).bits_per_dim;
        slot = orig - h;
        const double lm = m->nll(in.x, in.y, in.noise).bits_per_dim;
        slot = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        worst = std::max(worst, rel);
        ++total;
      }
    }
    return {worst, std::to_string(total) + " probes over " + std::to_string(by_class.size()) + " classes"};
  });

  if (!opt.full) return;
  s.check("model.nll_vs_jacobian_48", 1e-6, [&]() -> Note {
    ModelConfig c;
    c.scale = 2;
    c.levels = 1;
    c.flow_steps = 2;
    c.encoder_blocks = 1;
    c.encoder_width = 4;
    c.coupling_hidden = 4;
    c.ncl_blocks = {1};
    c.strict_noise_free = false;
    Rng init(opt.seed + 2);
    auto m = NcsrModel::build(c, init);
    perturb_parameters(*m, init, 0.2);
    double worst = 0.0;
    NoGradGuard guard;
    for (int t = 0; t < 10; ++t) {
      const ModelInputs in = random_inputs(c, rng, 1);
      auto f = [&](const Tensor& xx) {
        const ForwardResult fr = m->forward(Var::constant(xx), Var::constant(in.y), in.noise);
        return fr.latents.back().value();
      };
      const Tensor z = f(in.x);
      double sq = 0.0;
      for (int64_t i = 0; i < z.size(); ++i) sq += z[i] * z[i];
      const double logp = -0.5 * sq - 0.5 * static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi);
      const double brute = -(logp + log_abs_det_dense(numeric_jacobian(f, in.x, 1e-5), in.x.size()));
      const double model = m->nll(in.x, in.y, in.noise).nats[0];
      worst = std::max(worst, std::abs(brute - model));
    }
    return {worst, "10 inputs, 48 dims, nats"};
  });
}

void metric_properties(Suite& s, Rng& rng) {
  s.check("metrics.diversity_two_pixel", 1e-9, [&]() -> Note {
    SampleSet ss;
    ss.ground_truth = Tensor(Shape{1, 1, 1, 2});
    ss.samples = {Tensor(Shape{1, 1, 1, 2}, {0.1, 0.3}), Tensor(Shape{1, 1, 1, 2}, {0.3, 0.1})};
    return {std::abs(diversity_score(ss).value - 80.0), "expected 80"};
  });
  s.check("metrics.psnr_uniform_offset", 1e-9, [&]() -> Note {
    const Tensor a(Shape{1, 3, 4, 4}, 0.5), b(Shape{1, 3, 4, 4}, 0.6);
    return {std::abs(psnr(a, b) - 20.0), "expected 20 dB"};
  });
  s.check("resize.constant_preserved", 1e-12, [&]() -> Note {
    const double v = rng.uniform();
    const Tensor x(Shape{1, 2, 8, 8}, v);
    double worst = max_abs_diff(bicubic_resize(x, 1, 2), Tensor(Shape{1, 2, 4, 4}, v));
    worst = std::max(worst, max_abs_diff(bicubic_resize(x, 2, 1), Tensor(Shape{1, 2, 16, 16}, v)));
    return {worst, {}};
  });
  s.check("linalg.logdet_inverse_product", 1e-9, [&]() -> Note {
    SquareMatrix m(4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m(i, j) = rng.uniform() - 0.5 + (i == j ? 2.0 : 0.0);
    const auto a = logdet_and_inverse(m);
    const auto b = logdet_and_inverse(a.inverse);
    return {std::abs(std::exp(a.log_abs_det + b.log_abs_det) - 1.0), {}};
  });
}

}  // namespace

std::vector<PropertyResult> run_verify(const VerifyOptions& opt,
                                       const std::function<void(const PropertyResult&)>& on_result) {
  Suite s{{}, &on_result};
  Rng rng(opt.seed);
  layer_properties(s, rng, opt);
  model_properties(s, rng, opt);
  metric_properties(s, rng);
  return s.results;
}

}  // namespace ncsr
