#include "ncsr/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ncsr/resize.hpp"

namespace ncsr {

namespace {

// Stream keys for the training roles.
constexpr uint64_t kBatchStream = 1;
constexpr uint64_t kDequantStream = 2;
constexpr uint64_t kNoiseStream = 3;

}  // namespace

void TrainConfig::validate(const ModelConfig& model) const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (patch_hr < 1 || patch_hr % model.hr_multiple() != 0) {
    throw ConfigError("train.patch_hr = " + std::to_string(patch_hr) + " must be a positive multiple of scale*2^levels = " +
                      std::to_string(model.hr_multiple()));
  }
  if (!(lr_init > 0.0)) throw ConfigError("train.lr_init must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be > 0");
  for (size_t i = 1; i < halve_at.size(); ++i) {
    if (halve_at[i] <= halve_at[i - 1]) throw ConfigError("train.halve_at must be strictly increasing");
  }
  if (total_steps < 0) throw ConfigError("train.total_steps must be >= 0");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("train.grad_clip_norm must be > 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
}

std::string TrainConfig::serialize() const {
  std::ostringstream os;
  os << "train.batch_size = " << batch_size << "\n"
     << "train.patch_hr = " << patch_hr << "\n"
     << "train.lr_init = " << format_double(lr_init) << "\n"
     << "train.beta1 = " << format_double(beta1) << "\n"
     << "train.beta2 = " << format_double(beta2) << "\n"
     << "train.epsilon = " << format_double(epsilon) << "\n"
     << "train.halve_at = " << format_int_list(halve_at) << "\n"
     << "train.total_steps = " << total_steps << "\n"
     << "train.grad_clip_norm = " << format_double(grad_clip_norm) << "\n"
     << "train.seed = " << seed << "\n"
     << "train.hr_noise = " << (hr_noise ? "true" : "false") << "\n"
     << "train.lr_noise = " << (lr_noise ? "true" : "false") << "\n"
     << "train.dequantize = " << (dequantize ? "true" : "false") << "\n"
     << "train.checkpoint_every = " << checkpoint_every << "\n";
  return os.str();
}

bool TrainConfig::apply(const KvEntry& e) {
  const std::string& k = e.key;
  if (k == "train.batch_size") batch_size = parse_int(e);
  else if (k == "train.patch_hr") patch_hr = parse_int(e);
  else if (k == "train.lr_init") lr_init = parse_double(e);
  else if (k == "train.beta1") beta1 = parse_double(e);
  else if (k == "train.beta2") beta2 = parse_double(e);
  else if (k == "train.epsilon") epsilon = parse_double(e);
  else if (k == "train.halve_at") halve_at = parse_int_list(e);
  else if (k == "train.total_steps") total_steps = parse_int(e);
  else if (k == "train.grad_clip_norm") grad_clip_norm = parse_double(e);
  else if (k == "train.seed") seed = parse_u64(e);
  else if (k == "train.hr_noise") hr_noise = parse_bool(e);
  else if (k == "train.lr_noise") lr_noise = parse_bool(e);
  else if (k == "train.dequantize") dequantize = parse_bool(e);
  else if (k == "train.checkpoint_every") checkpoint_every = parse_int(e);
  else return false;
  return true;
}

double learning_rate(const TrainConfig& tc, int step) {
  double lr = tc.lr_init;
  for (int m : tc.halve_at) {
    if (step >= m) lr *= 0.5;
  }
  return lr;
}

std::string format_record(const TrainRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.6g\t%.6g\t%.3f", r.step, r.bits_per_dim, r.lr, r.grad_norm, r.seconds);
  return buf;
}

Batch make_batch(const std::vector<Tensor>& corpus, Rng& rng, int batch_size, int patch, int scale,
                 std::vector<std::string>* warnings) {
  std::vector<size_t> usable;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const Shape& s = corpus[i].shape();
    if (s.h >= patch && s.w >= patch) {
      usable.push_back(i);
    } else if (warnings) {
      warnings->push_back("skipping corpus image " + std::to_string(i) + " (" + s.str() + "): smaller than patch " +
                          std::to_string(patch));
    }
  }
  if (usable.empty()) throw Error(ErrorKind::kInvalidArgument, "training corpus has no image of at least the patch size");

  std::vector<Tensor> xs;
  xs.reserve(static_cast<size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const Tensor& img = corpus[usable[rng.below(usable.size())]];
    const Shape& s = img.shape();
    const int64_t top = static_cast<int64_t>(rng.below(static_cast<uint64_t>(s.h - patch + 1)));
    const int64_t left = static_cast<int64_t>(rng.below(static_cast<uint64_t>(s.w - patch + 1)));
    Tensor crop(Shape{1, 3, patch, patch});
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < patch; ++i)
        for (int64_t j = 0; j < patch; ++j) crop.at(0, c, i, j) = img.at(0, c, top + i, left + j);
    const int k = static_cast<int>(rng.below(4));
    const bool flip = rng.below(2) == 1;
    crop = rot90(crop, k);
    if (flip) crop = flip_horizontal(crop);
    xs.push_back(std::move(crop));
  }
  Batch out;
  out.x = concat_batch(xs);
  out.y = bicubic_resize(out.x, 1, scale);
  return out;
}

Adam::Adam(ParamList params, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (const NamedParam& p : params_) {
    m_.push_back(Tensor::zeros(p.var->shape()));
    v_.push_back(Tensor::zeros(p.var->shape()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    const Tensor g = params_[i].var->grad();
    Tensor& p = params_[i].var->mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t k = 0; k < p.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::scale_grads(double factor) {
  for (const NamedParam& p : params_) {
    Node& node = *p.var->node();
    for (int64_t k = 0; k < node.grad.size(); ++k) node.grad[k] *= factor;
  }
}

double Adam::grad_norm() const {
  double s = 0.0;
  for (const NamedParam& p : params_) {
    const Tensor& g = p.var->node()->grad;
    for (int64_t k = 0; k < g.size(); ++k) s += g[k] * g[k];
  }
  return std::sqrt(s);
}

bool Adam::grads_finite() const {
  for (const NamedParam& p : params_) {
    if (!p.var->node()->grad.all_finite()) return false;
  }
  return true;
}

void Adam::zero_grad() {
  for (const NamedParam& p : params_) p.var->zero_grad();
}

TrainResult train(NcsrModel& model, const std::vector<Tensor>& corpus, const TrainConfig& tc, const TrainHooks& hooks) {
  tc.validate(model.config());
  const ModelConfig& cfg = model.config();
  const Rng root(tc.seed);
  Rng batch_rng = root.derive(kBatchStream);
  Rng dequant_rng = root.derive(kDequantStream);
  Rng noise_rng = root.derive(kNoiseStream);

  TrainResult result;
  auto event = [&](const std::string& msg) {
    result.events.push_back(msg);
    if (hooks.on_event) hooks.on_event(msg);
  };

  Adam adam(model.parameters(), tc.beta1, tc.beta2, tc.epsilon);
  const auto t0 = std::chrono::steady_clock::now();
  int consecutive_bad = 0;
  std::string first_bad;

  for (int step = 1; step <= tc.total_steps; ++step) {
    std::vector<std::string> warnings;
    Batch batch = make_batch(corpus, batch_rng, tc.batch_size, tc.patch_hr, cfg.scale, &warnings);
    if (step == 1) {
      for (const std::string& w : warnings) event(w);
    }
    Tensor x = tc.dequantize ? dequantize(batch.x, dequant_rng) : batch.x;
    const NoiseSample ns = draw_noise(noise_rng, x.shape(), batch.y.shape(), cfg.noise_M);
    Tensor y = batch.y;
    if (tc.hr_noise) x = perturb(x, batch.y, ns).x_plus;
    if (tc.lr_noise) y = perturb(batch.x, batch.y, ns).y_plus;
    NoiseCond cond = tc.hr_noise ? ns.cond() : NoiseCond{};

    if (!model.data_initialized()) {
      model.data_init(x, y, cond);
      event("actnorm data-dependent init from step " + std::to_string(step) + " batch");
    }

    const double lr = learning_rate(tc, step);
    TrainRecord rec;
    rec.step = step;
    rec.lr = lr;

    std::string bad;
    NllResult res;
    try {
      res = model.nll(x, y, cond);
      if (!std::isfinite(res.bits_per_dim)) bad = "loss";
    } catch (const NumericError& e) {
      bad = e.where();
    }
    if (!bad.empty()) {
      if (consecutive_bad == 0) first_bad = bad;
      ++consecutive_bad;
      event("step " + std::to_string(step) + ": non-finite value at " + bad + ", update skipped");
      if (consecutive_bad >= 2) {
        throw TrainingAborted("training aborted at step " + std::to_string(step) +
                              ": two consecutive non-finite losses; first non-finite layer: " + first_bad);
      }
      continue;
    }
    consecutive_bad = 0;

    adam.zero_grad();
    backward(res.loss);
    rec.bits_per_dim = res.bits_per_dim;
    if (!adam.grads_finite()) {
      rec.grad_norm = std::nan("");
      event("step " + std::to_string(step) + ": non-finite gradient, update skipped");
    } else {
      rec.grad_norm = adam.grad_norm();
      if (rec.grad_norm > tc.grad_clip_norm) adam.scale_grads(tc.grad_clip_norm / rec.grad_norm);
      adam.step(lr);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.records.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);

    if (hooks.on_checkpoint && tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 && step != tc.total_steps) {
      hooks.on_checkpoint(step, model, CheckpointMeta{static_cast<uint64_t>(step), batch_rng.state()});
    }
  }
  adam.zero_grad();
  result.meta.step = static_cast<uint64_t>(tc.total_steps);
  result.meta.rng_state = batch_rng.state();
  return result;
}

}  // namespace ncsr
