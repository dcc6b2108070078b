#include "ncsr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ncsr/resize.hpp"

namespace ncsr {

namespace {

int log2_exact(int v) {
  int k = 0;
  while ((1 << k) < v) ++k;
  return (1 << k) == v ? k : -1;
}

void check_values(const Var& v, const std::string& where) { check_finite(v.value(), where); }

}  // namespace

std::string to_string(ConditioningVariant v) {
  switch (v) {
    case ConditioningVariant::kNoise: return "noise";
    case ConditioningVariant::kStd: return "std";
    case ConditioningVariant::kNone: return "none";
  }
  return "none";
}

ConditioningVariant parse_variant(const std::string& s) {
  if (s == "noise") return ConditioningVariant::kNoise;
  if (s == "std") return ConditioningVariant::kStd;
  if (s == "none") return ConditioningVariant::kNone;
  throw ConfigError("unknown conditioning variant '" + s + "' (expected noise, std or none)");
}

// ---------------------------------------------------------------- config

void ModelConfig::validate(std::vector<std::string>* warnings) const {
  if (scale != 2 && scale != 4 && scale != 8) throw ConfigError("model.scale must be 2, 4 or 8");
  if (levels < 1) throw ConfigError("model.levels must be >= 1");
  if (flow_steps < 1) throw ConfigError("model.flow_steps must be >= 1");
  if (encoder_blocks < 0) throw ConfigError("model.encoder_blocks must be >= 0");
  if (encoder_width < 2) throw ConfigError("model.encoder_width must be >= 2");
  if (coupling_hidden < 1) throw ConfigError("model.coupling_hidden must be >= 1");
  if (!(noise_M >= 0.0)) throw ConfigError("model.noise_M must be >= 0");
  if (!(temperature >= 0.0)) throw ConfigError("model.temperature must be >= 0");
  if (!(scale_bound > 0.0)) throw ConfigError("model.scale_bound must be > 0");
  for (int b : ncl_blocks) {
    if (b < 1 || b > levels) {
      throw ConfigError("model.ncl_blocks entry " + std::to_string(b) + " outside 1.." + std::to_string(levels));
    }
  }
  if (conditioning != ConditioningVariant::kNone &&
      std::find(ncl_blocks.begin(), ncl_blocks.end(), levels) != ncl_blocks.end()) {
    const std::string msg = "model.ncl_blocks contains block " + std::to_string(levels) +
                            ", the last block in inference order; the network needs a noise-free final block";
    if (strict_noise_free) throw ConfigError(msg);
    if (warnings) warnings->push_back(msg);
  }
}

bool ModelConfig::has_ncl(int level) const {
  if (conditioning == ConditioningVariant::kNone) return false;
  const int block = levels - level + 1;
  return std::find(ncl_blocks.begin(), ncl_blocks.end(), block) != ncl_blocks.end();
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "model.scale = " << scale << "\n"
     << "model.levels = " << levels << "\n"
     << "model.flow_steps = " << flow_steps << "\n"
     << "model.ncl_blocks = " << format_int_list(ncl_blocks) << "\n"
     << "model.conditioning = " << to_string(conditioning) << "\n"
     << "model.encoder_blocks = " << encoder_blocks << "\n"
     << "model.encoder_width = " << encoder_width << "\n"
     << "model.coupling_hidden = " << coupling_hidden << "\n"
     << "model.noise_M = " << format_double(noise_M) << "\n"
     << "model.temperature = " << format_double(temperature) << "\n"
     << "model.scale_bound = " << format_double(scale_bound) << "\n"
     << "model.standard_normal_prior = " << (standard_normal_prior ? "true" : "false") << "\n"
     << "model.strict_noise_free = " << (strict_noise_free ? "true" : "false") << "\n";
  return os.str();
}

bool ModelConfig::apply(const KvEntry& e) {
  const std::string& k = e.key;
  if (k == "model.scale") scale = parse_int(e);
  else if (k == "model.levels") levels = parse_int(e);
  else if (k == "model.flow_steps") flow_steps = parse_int(e);
  else if (k == "model.ncl_blocks") ncl_blocks = parse_int_list(e);
  else if (k == "model.conditioning") {
    try {
      conditioning = parse_variant(e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + k + ": " + err.what());
    }
  } else if (k == "model.encoder_blocks") encoder_blocks = parse_int(e);
  else if (k == "model.encoder_width") encoder_width = parse_int(e);
  else if (k == "model.coupling_hidden") coupling_hidden = parse_int(e);
  else if (k == "model.noise_M") noise_M = parse_double(e);
  else if (k == "model.temperature") temperature = parse_double(e);
  else if (k == "model.scale_bound") scale_bound = parse_double(e);
  else if (k == "model.standard_normal_prior") standard_normal_prior = parse_bool(e);
  else if (k == "model.strict_noise_free") strict_noise_free = parse_bool(e);
  else return false;
  return true;
}

ModelConfig ModelConfig::parse(const std::string& text) {
  ModelConfig cfg;
  for (const auto& e : parse_kv(text)) {
    if (!cfg.apply(e)) throw ConfigError("line " + std::to_string(e.line) + ": unknown key " + e.key);
  }
  return cfg;
}

// ---------------------------------------------------------------- encoder

LrEncoder::LrEncoder(const ModelConfig& cfg) : cfg_(cfg) {
  const int64_t w = cfg.encoder_width;
  const int64_t g = std::max<int64_t>(1, w / 2);
  first_ = Conv(3, w, 3, 1, "encoder.first", false);
  for (int b = 0; b < cfg.encoder_blocks; ++b) {
    const std::string p = "encoder.block" + std::to_string(b);
    blocks_.push_back(DenseBlock{Conv(w, g, 3, 1, p + ".c1", false), Conv(w + g, g, 3, 1, p + ".c2", false),
                                 Conv(w + 2 * g, w, 3, 1, p + ".c3", false)});
  }
  trunk_ = Conv(w, w, 3, 1, "encoder.trunk", false);
  const int k = log2_exact(cfg.scale);
  for (int l = k + 1; l <= cfg.levels; ++l) {
    down_.push_back(Conv(w, w, 3, 2, "encoder.down" + std::to_string(l), false));
  }
}

std::vector<Var> LrEncoder::operator()(const Var& y) const {
  if (y.shape().c != 3) throw ShapeError("LR encoder expects 3 channels, got " + y.shape().str());
  Var feat = first_(y);
  Var h = feat;
  for (const auto& b : blocks_) {
    Var c1 = leaky_relu(b.c1(h), 0.2);
    const Var p1[] = {h, c1};
    Var c2 = leaky_relu(b.c2(concat_channels(p1)), 0.2);
    const Var p2[] = {h, c1, c2};
    h = add(h, scale(b.c3(concat_channels(p2)), 0.2));
  }
  feat = add(feat, trunk_(h));

  const int k = log2_exact(cfg_.scale);
  std::vector<Var> out;
  Var prev = feat;
  for (int l = 1; l <= cfg_.levels; ++l) {
    if (l < k) {
      const int64_t f = int64_t{1} << (k - l);
      const Shape s = feat.shape();
      out.push_back(resample(feat, Resampler(s.h, s.w, s.h * f, s.w * f)));
    } else if (l == k) {
      out.push_back(feat);
      prev = feat;
    } else {
      prev = leaky_relu(down_[static_cast<size_t>(l - k - 1)](prev), 0.2);
      out.push_back(prev);
    }
  }
  return out;
}

void LrEncoder::collect(ParamList& out) {
  first_.collect("encoder.first", out);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const std::string p = "encoder.block" + std::to_string(b);
    blocks_[b].c1.collect(p + ".c1", out);
    blocks_[b].c2.collect(p + ".c2", out);
    blocks_[b].c3.collect(p + ".c3", out);
  }
  trunk_.collect("encoder.trunk", out);
  const int k = log2_exact(cfg_.scale);
  for (size_t i = 0; i < down_.size(); ++i) down_[i].collect("encoder.down" + std::to_string(k + 1 + i), out);
}

// ---------------------------------------------------------------- model

std::unique_ptr<NcsrModel> NcsrModel::build(const ModelConfig& cfg, Rng& rng, std::vector<std::string>* warnings) {
  cfg.validate(warnings);
  std::unique_ptr<NcsrModel> m(new NcsrModel());
  m->cfg_ = cfg;
  m->encoder_ = LrEncoder(cfg);
  const int64_t cu = cfg.encoder_width;
  const double bound = cfg.scale_bound;
  int64_t c = 3;
  for (int l = 1; l <= cfg.levels; ++l) {
    c *= 4;
    const int64_t noise_ch = 3 * (int64_t{1} << (2 * l));
    const std::string lp = "level" + std::to_string(l);
    Level level;
    auto push = [&](std::unique_ptr<FlowLayer> layer, std::string name) {
      level.layers.push_back(std::move(layer));
      level.names.push_back(std::move(name));
    };
    push(std::make_unique<ActNorm>(c), "transition.actnorm");
    push(std::make_unique<InvConv1x1>(c, rng), "transition.conv1x1");
    for (int k = 0; k < cfg.flow_steps; ++k) {
      const std::string sp = "step" + std::to_string(k);
      push(std::make_unique<ActNorm>(c), sp + ".actnorm");
      push(std::make_unique<InvConv1x1>(c, rng), sp + ".conv1x1");
      push(std::make_unique<AffineInjector>(c, cu, cfg.coupling_hidden, bound, lp + "." + sp + ".injector"),
           sp + ".injector");
      if (cfg.has_ncl(l)) {
        const CondMode mode =
            cfg.conditioning == ConditioningVariant::kStd ? CondMode::kLrAndStd : CondMode::kLrAndNoise;
        push(std::make_unique<CondAffineCoupling>(c, cu, mode, noise_ch, cfg.coupling_hidden, bound,
                                                  lp + "." + sp + ".ncl"),
             sp + ".ncl");
      }
      push(std::make_unique<CondAffineCoupling>(c, cu, CondMode::kLrOnly, 0, cfg.coupling_hidden, bound,
                                                lp + "." + sp + ".coupling"),
           sp + ".coupling");
    }
    if (l < cfg.levels) {
      level.split = std::make_unique<Split>(c, cu, cfg.standard_normal_prior, lp + ".split");
      c /= 2;
    }
    m->levels_.push_back(std::move(level));
  }
  return m;
}

ParamList NcsrModel::parameters() {
  ParamList out;
  encoder_.collect(out);
  for (size_t l = 0; l < levels_.size(); ++l) {
    const std::string lp = "level" + std::to_string(l + 1);
    auto& level = levels_[l];
    for (size_t i = 0; i < level.layers.size(); ++i) level.layers[i]->collect(lp + "." + level.names[i], out);
    if (level.split) level.split->collect(lp + ".split", out);
  }
  return out;
}

std::string NcsrModel::param_class(const std::string& name) {
  if (name.rfind("encoder.", 0) == 0) return "encoder";
  if (name.find(".actnorm.") != std::string::npos) return "actnorm";
  if (name.find(".conv1x1.") != std::string::npos) return "conv1x1";
  if (name.find(".split.") != std::string::npos) return "split_prior";
  return "coupling";
}

void NcsrModel::check_inputs(const Shape& hr, const Shape& lr) const {
  if (hr.c != 3 || lr.c != 3) throw ShapeError("expected 3-channel images, got HR " + hr.str() + " LR " + lr.str());
  if (hr.n != lr.n) throw ShapeError("HR/LR batch mismatch: " + hr.str() + " vs " + lr.str());
  if (hr.h != lr.h * cfg_.scale || hr.w != lr.w * cfg_.scale) {
    throw ShapeError("HR " + hr.str() + " is not LR " + lr.str() + " times scale " + std::to_string(cfg_.scale));
  }
  const int64_t mult = int64_t{1} << cfg_.levels;
  if (hr.h % mult != 0 || hr.w % mult != 0) {
    throw ShapeError("HR " + hr.str() + " not divisible by 2^levels = " + std::to_string(mult));
  }
}

std::vector<Shape> NcsrModel::latent_shapes(int64_t n, int64_t hr_h, int64_t hr_w) const {
  std::vector<Shape> out;
  int64_t c = 3, h = hr_h, w = hr_w;
  for (int l = 1; l <= cfg_.levels; ++l) {
    c *= 4;
    h /= 2;
    w /= 2;
    if (l < cfg_.levels) {
      out.push_back(Shape{n, c / 2, h, w});
      c /= 2;
    } else {
      out.push_back(Shape{n, c, h, w});
    }
  }
  return out;
}

LrEncoding NcsrModel::encode_lr(const Var& y) const { return LrEncoding{encoder_(y)}; }

std::vector<ConditioningBundle> NcsrModel::conditioning(const LrEncoding& enc, const NoiseCond& noise,
                                                        const Shape& hr) const {
  std::vector<ConditioningBundle> out(static_cast<size_t>(cfg_.levels));
  Tensor v;
  if (cfg_.conditioning == ConditioningVariant::kNoise) {
    if (noise.v.empty()) {
      v = Tensor(hr);
    } else {
      check_same_shape(noise.v, Tensor(hr), "noise vector v");
      v = noise.v;
    }
  }
  if (!noise.c.empty() && static_cast<int64_t>(noise.c.size()) != hr.n) {
    throw ShapeError("noise std count " + std::to_string(noise.c.size()) + " does not match batch " + hr.str());
  }
  Var v_cur = Var::constant(v);
  for (int l = 1; l <= cfg_.levels; ++l) {
    auto& b = out[static_cast<size_t>(l - 1)];
    b.u = enc.u_pyramid[static_cast<size_t>(l - 1)];
    if (cfg_.conditioning == ConditioningVariant::kNoise) {
      v_cur = squeeze2(v_cur);
      if (cfg_.has_ncl(l)) b.v_sq = v_cur;
    } else if (cfg_.conditioning == ConditioningVariant::kStd && cfg_.has_ncl(l)) {
      const int64_t h = hr.h >> l, w = hr.w >> l;
      Tensor cm(Shape{hr.n, 1, h, w});
      for (int64_t n = 0; n < hr.n; ++n) {
        const double cv = noise.c.empty() ? 0.0 : noise.c[static_cast<size_t>(n)];
        std::fill(cm.data() + n * h * w, cm.data() + (n + 1) * h * w, cv);
      }
      b.c_map = Var::constant(std::move(cm));
    }
  }
  return out;
}

ForwardResult NcsrModel::run_forward(const Var& x, const Var& y, const NoiseCond& noise, bool init) const {
  const Shape hr = x.shape();
  check_inputs(hr, y.shape());
  const LrEncoding enc = encode_lr(y);
  for (size_t l = 0; l < enc.u_pyramid.size(); ++l) check_values(enc.u_pyramid[l], "encoder level " + std::to_string(l + 1));
  const auto conds = conditioning(enc, noise, hr);

  ForwardResult r;
  FlowState st = FlowState::start(x);
  Var logp = Var::constant(Tensor(Shape{hr.n, 1, 1, 1}));
  for (int l = 1; l <= cfg_.levels; ++l) {
    const auto& level = levels_[static_cast<size_t>(l - 1)];
    const auto& cond = conds[static_cast<size_t>(l - 1)];
    const std::string lp = "level" + std::to_string(l) + ".";
    st = squeeze(st);
    for (size_t i = 0; i < level.layers.size(); ++i) {
      if (init) level.layers[i]->data_init(st, cond);
      st = level.layers[i]->forward(st, cond);
      check_values(st.h, lp + level.names[i]);
      check_values(st.logdet, lp + level.names[i] + " (logdet)");
    }
    if (level.split) {
      auto sr = level.split->forward(st, cond.u);
      check_values(sr.logp, lp + "split");
      r.latents.push_back(sr.z);
      logp = add(logp, sr.logp);
      st = sr.state;
    }
  }
  r.latents.push_back(st.h);
  r.logp = add(logp, standard_normal_log_density(st.h));
  check_values(r.logp, "final prior");
  r.logdet = st.logdet;
  return r;
}

ForwardResult NcsrModel::forward(const Var& x, const Var& y, const NoiseCond& noise) const {
  return run_forward(x, y, noise, false);
}

void NcsrModel::data_init(const Tensor& x, const Tensor& y, const NoiseCond& noise) {
  NoGradGuard guard;
  run_forward(Var::constant(x), Var::constant(y), noise, true);
  data_initialized_ = true;
}

NllResult NcsrModel::nll(const Tensor& x, const Tensor& y, const NoiseCond& noise) const {
  const ForwardResult fr = forward(Var::constant(x), Var::constant(y), noise);
  Var nats = neg(add(fr.logp, fr.logdet));
  const double dims = static_cast<double>(x.shape().per_sample());
  NllResult out;
  out.loss = scale(mean(nats), 1.0 / (dims * std::numbers::ln2));
  out.nats = nats.value();
  out.bits_per_dim = out.loss.value().item();
  return out;
}

Tensor NcsrModel::reverse(const std::vector<Tensor>& latents, const Tensor& y, const NoiseCond& noise) const {
  NoGradGuard guard;
  if (static_cast<int>(latents.size()) != cfg_.levels) {
    throw ShapeError("reverse expects " + std::to_string(cfg_.levels) + " latents, got " +
                     std::to_string(latents.size()));
  }
  const Shape top = latents.back().shape();
  const int64_t f = int64_t{1} << cfg_.levels;
  const Shape hr{top.n, 3, top.h * f, top.w * f};
  const Var yv = Var::constant(y);
  check_inputs(hr, y.shape());
  const auto conds = conditioning(encode_lr(yv), noise, hr);
  FlowState st = FlowState::start(Var::constant(latents.back()));
  for (int l = cfg_.levels; l >= 1; --l) {
    const auto& level = levels_[static_cast<size_t>(l - 1)];
    const auto& cond = conds[static_cast<size_t>(l - 1)];
    if (level.split) st = level.split->inverse(st, cond.u, latents[static_cast<size_t>(l - 1)], 0.0, nullptr);
    for (size_t i = level.layers.size(); i-- > 0;) st = level.layers[i]->inverse(st, cond);
    st = unsqueeze(st);
  }
  return st.h.value();
}

std::vector<NcsrModel::Sample> NcsrModel::sample_with_latents(const Tensor& y, double temperature, Rng& rng, int n,
                                                              bool clamp) const {
  require(temperature >= 0.0, "sample: temperature must be >= 0");
  require(n >= 0, "sample: n must be >= 0");
  NoGradGuard guard;
  const Shape lr = y.shape();
  const Shape hr{lr.n, 3, lr.h * cfg_.scale, lr.w * cfg_.scale};
  check_inputs(hr, lr);
  const auto conds = conditioning(encode_lr(Var::constant(y)), NoiseCond{}, hr);
  const auto shapes = latent_shapes(hr.n, hr.h, hr.w);

  std::vector<Sample> out;
  for (int s = 0; s < n; ++s) {
    Sample smp;
    smp.latents.resize(shapes.size());
    Tensor top = gaussian(rng, shapes.back(), 1.0);
    for (double& v : top.values()) v *= temperature;
    smp.latents.back() = top;
    FlowState st = FlowState::start(Var::constant(std::move(top)));
    for (int l = cfg_.levels; l >= 1; --l) {
      const auto& level = levels_[static_cast<size_t>(l - 1)];
      const auto& cond = conds[static_cast<size_t>(l - 1)];
      if (level.split) {
        st = level.split->inverse(st, cond.u, std::nullopt, temperature, &rng,
                                  &smp.latents[static_cast<size_t>(l - 1)]);
      }
      for (size_t i = level.layers.size(); i-- > 0;) st = level.layers[i]->inverse(st, cond);
      st = unsqueeze(st);
    }
    smp.x = st.h.value();
    if (clamp) {
      for (double& v : smp.x.values()) v = std::clamp(v, 0.0, 1.0);
    }
    out.push_back(std::move(smp));
  }
  return out;
}

std::vector<Tensor> NcsrModel::sample(const Tensor& y, double temperature, Rng& rng, int n) const {
  std::vector<Tensor> out;
  for (auto& s : sample_with_latents(y, temperature, rng, n, true)) out.push_back(std::move(s.x));
  return out;
}

}  // namespace ncsr
