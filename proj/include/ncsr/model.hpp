#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ncsr/flow_layers.hpp"
#include "ncsr/kv.hpp"

namespace ncsr {

enum class ConditioningVariant { kNoise, kStd, kNone };

std::string to_string(ConditioningVariant v);
ConditioningVariant parse_variant(const std::string& s);

/// Architecture record. Levels are numbered 1..L from image space inward in
/// the data-to-latent direction; `ncl_blocks` counts blocks in inference
/// (latent-to-image) order, so block b is level L - b + 1 and block L is the
/// one that writes the image.
struct ModelConfig {
  int scale = 4;
  int levels = 3;
  int flow_steps = 4;
  std::vector<int> ncl_blocks{1, 2};
  ConditioningVariant conditioning = ConditioningVariant::kNoise;
  int encoder_blocks = 2;
  int encoder_width = 32;
  int coupling_hidden = 32;
  double noise_M = 0.1;
  double temperature = 0.9;
  double scale_bound = 2.0;
  bool standard_normal_prior = false;
  /// Reject configs without a noise-free final block; otherwise warn.
  bool strict_noise_free = true;

  /// Throws ConfigError on any invariant violation. `warnings` collects the
  /// noise-free-block complaint in permissive mode.
  void validate(std::vector<std::string>* warnings = nullptr) const;
  /// Required HR side multiple: scale * 2^levels.
  int hr_multiple() const { return scale << levels; }
  /// Level (1-based, data side first) carries a noise conditional layer.
  bool has_ncl(int level) const;

  /// `model.*` key = value lines.
  std::string serialize() const;
  /// Applies one `model.*` entry; returns false for keys outside the model.
  bool apply(const KvEntry& e);
  static ModelConfig parse(const std::string& text);
};

/// Noise information the flow is conditioned on. `v` is HR-shaped; `c`
/// holds the noise std per batch element. Either may be left empty, which
/// means zero.
struct NoiseCond {
  Tensor v;
  std::vector<double> c;
};

/// Residual-dense LR encoder. Produces one feature map per level at that
/// level's resolution: cubic upsampling for levels finer than the LR image,
/// strided convolutions for coarser ones.
class LrEncoder {
 public:
  LrEncoder() = default;
  LrEncoder(const ModelConfig& cfg);
  std::vector<Var> operator()(const Var& y) const;
  void collect(ParamList& out);

 private:
  struct DenseBlock {
    Conv c1, c2, c3;
  };
  ModelConfig cfg_;
  Conv first_, trunk_;
  std::vector<DenseBlock> blocks_;
  std::vector<Conv> down_;
};

struct LrEncoding {
  std::vector<Var> u_pyramid;
};

struct ForwardResult {
  std::vector<Var> latents;  ///< z_1 .. z_L (split latents then the final one)
  Var logp;                  ///< (N, 1, 1, 1) prior log-density of all latents
  Var logdet;                ///< (N, 1, 1, 1)
};

struct NllResult {
  Var loss;               ///< scalar: batch-mean bits per dimension, differentiable
  Tensor nats;            ///< (N, 1, 1, 1) negative log-likelihood per sample
  double bits_per_dim = 0.0;
};

class NcsrModel {
 public:
  /// Builds the layer stack. `rng` only feeds the 1x1 weights.
  static std::unique_ptr<NcsrModel> build(const ModelConfig& cfg, Rng& rng,
                                          std::vector<std::string>* warnings = nullptr);

  const ModelConfig& config() const { return cfg_; }

  LrEncoding encode_lr(const Var& y) const;

  /// Data to latent. x is HR (N, 3, H, W), y is LR (N, 3, H/s, W/s).
  ForwardResult forward(const Var& x, const Var& y, const NoiseCond& noise) const;
  /// Latent to data for explicit latents (as returned by forward).
  Tensor reverse(const std::vector<Tensor>& latents, const Tensor& y, const NoiseCond& noise) const;

  NllResult nll(const Tensor& x, const Tensor& y, const NoiseCond& noise) const;

  struct Sample {
    Tensor x;
    std::vector<Tensor> latents;
  };
  /// Draws latents at the given temperature and decodes with zero noise.
  /// Output is clamped to [0, 1] unless `clamp` is false.
  std::vector<Sample> sample_with_latents(const Tensor& y, double temperature, Rng& rng, int n,
                                          bool clamp = true) const;
  std::vector<Tensor> sample(const Tensor& y, double temperature, Rng& rng, int n) const;

  /// Runs one forward pass initialising every actnorm from its input.
  void data_init(const Tensor& x, const Tensor& y, const NoiseCond& noise);
  bool data_initialized() const { return data_initialized_; }
  void set_data_initialized(bool v) { data_initialized_ = v; }

  /// Every trainable tensor with a stable dotted name, in build order.
  ParamList parameters();
  /// Parameter classes used by gradient checks: actnorm, conv1x1,
  /// coupling, encoder, split_prior.
  static std::string param_class(const std::string& name);

  /// Shapes of z_1 .. z_L for an HR input of the given size.
  std::vector<Shape> latent_shapes(int64_t n, int64_t hr_h, int64_t hr_w) const;

 private:
  NcsrModel() = default;

  struct Level {
    std::vector<std::unique_ptr<FlowLayer>> layers;
    std::vector<std::string> names;
    std::unique_ptr<Split> split;
  };

  std::vector<ConditioningBundle> conditioning(const LrEncoding& enc, const NoiseCond& noise,
                                               const Shape& hr) const;
  void check_inputs(const Shape& hr, const Shape& lr) const;
  // Layers sit behind unique_ptr, so init mode may update actnorm in place.
  ForwardResult run_forward(const Var& x, const Var& y, const NoiseCond& noise, bool init) const;

  ModelConfig cfg_;
  LrEncoder encoder_;
  std::vector<Level> levels_;
  bool data_initialized_ = false;
};

}  // namespace ncsr
