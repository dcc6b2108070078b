#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ncsr/autograd.hpp"
#include "ncsr/rng.hpp"

namespace ncsr {

/// Activation plus per-sample accumulated log|det J|, shape (N, 1, 1, 1).
struct FlowState {
  Var h;
  Var logdet;

  static FlowState start(const Var& h);
};

enum class CondMode { kLrOnly, kLrAndNoise, kLrAndStd };

/// Conditioning inputs, spatially aligned with the activation they condition.
struct ConditioningBundle {
  Var u;      ///< LR encoding at this resolution
  Var v_sq;   ///< noise squeezed to this resolution (noise mode)
  Var c_map;  ///< one channel holding the noise std per sample (std mode)
};

struct NamedParam {
  std::string name;
  Var* var;
};
using ParamList = std::vector<NamedParam>;

/// Parameters other than 1x1 weights are drawn from a stream keyed by their
/// name, so model structure fully determines their initial values.
Rng structural_rng(const std::string& name);

/// 2-D convolution with owned parameters.
struct Conv {
  Var weight;
  Var bias;
  int stride = 1;
  int pad = 1;

  Conv() = default;
  /// Uniform(+-1/sqrt(fan_in)) weights, zero bias; all zeros when zero_init.
  Conv(int64_t cin, int64_t cout, int k, int stride, const std::string& name, bool zero_init);
  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
  void collect(const std::string& prefix, ParamList& out);
};

/// conv3x3 -> ReLU -> conv3x3 (zero initialised); the output channels are
/// split into a bounded log-scale half and a shift half.
class AffineNet {
 public:
  AffineNet() = default;
  AffineNet(int64_t cin, int64_t cout, int64_t hidden, double bound, const std::string& name);
  /// Returns (log-scale, shift), each with `cout` channels.
  std::pair<Var, Var> operator()(const Var& x) const;
  void collect(const std::string& prefix, ParamList& out);
  Conv& head() { return head_; }
  Conv& body() { return body_; }

 private:
  Conv body_, head_;
  int64_t cout_ = 0;
  double bound_ = 2.0;
};

class FlowLayer {
 public:
  virtual ~FlowLayer() = default;
  virtual FlowState forward(const FlowState& s, const ConditioningBundle& cond) const = 0;
  virtual FlowState inverse(const FlowState& s, const ConditioningBundle& cond) const = 0;
  /// Data-dependent initialisation from the layer's first input.
  virtual void data_init(const FlowState&, const ConditioningBundle&) {}
  virtual void collect(const std::string& prefix, ParamList& out) = 0;
  virtual std::string kind() const = 0;
};

/// h' = s * (h + b) per channel.
class ActNorm final : public FlowLayer {
 public:
  explicit ActNorm(int64_t channels);
  FlowState forward(const FlowState& s, const ConditioningBundle& cond) const override;
  FlowState inverse(const FlowState& s, const ConditioningBundle& cond) const override;
  /// Sets b = -mean, s = 1/std over (N, H, W) of the given activation.
  void data_init(const FlowState& s, const ConditioningBundle& cond) override;
  void collect(const std::string& prefix, ParamList& out) override;
  std::string kind() const override { return "actnorm"; }

  Var scale;
  Var shift;
};

/// Channel mixing by a learned invertible matrix at every pixel.
class InvConv1x1 final : public FlowLayer {
 public:
  InvConv1x1(int64_t channels, Rng& rng);
  FlowState forward(const FlowState& s, const ConditioningBundle& cond) const override;
  FlowState inverse(const FlowState& s, const ConditioningBundle& cond) const override;
  void collect(const std::string& prefix, ParamList& out) override;
  std::string kind() const override { return "conv1x1"; }

  Var weight;  ///< (C, C, 1, 1)
};

/// h' = exp(s(u)) * h + b(u).
class AffineInjector final : public FlowLayer {
 public:
  AffineInjector(int64_t channels, int64_t cond_channels, int64_t hidden, double bound, const std::string& name);
  FlowState forward(const FlowState& s, const ConditioningBundle& cond) const override;
  FlowState inverse(const FlowState& s, const ConditioningBundle& cond) const override;
  void collect(const std::string& prefix, ParamList& out) override;
  std::string kind() const override { return "injector"; }

  AffineNet net;
};

/// A = first ceil(C/2) channels passes through; B' = exp(s) * B + b with
/// (s, b) computed from A and the conditioning. In noise mode the network
/// also sees the squeezed noise (the noise conditional layer); in std mode
/// it sees the constant std map instead.
class CondAffineCoupling final : public FlowLayer {
 public:
  CondAffineCoupling(int64_t channels, int64_t cond_channels, CondMode mode, int64_t noise_channels,
                     int64_t hidden, double bound, const std::string& name);
  FlowState forward(const FlowState& s, const ConditioningBundle& cond) const override;
  FlowState inverse(const FlowState& s, const ConditioningBundle& cond) const override;
  void collect(const std::string& prefix, ParamList& out) override;
  std::string kind() const override { return mode_ == CondMode::kLrOnly ? "lr_coupling" : "ncl_coupling"; }
  CondMode mode() const { return mode_; }
  int64_t a_channels() const { return ca_; }

  AffineNet net;

 private:
  Var net_input(const Var& a, const ConditioningBundle& cond) const;
  int64_t channels_, ca_;
  CondMode mode_;
};

FlowState squeeze(const FlowState& s);
FlowState unsqueeze(const FlowState& s);

/// Factors out the second channel half as a latent scored under a Gaussian
/// whose mean and log-std come from the retained half and the LR encoding.
class Split {
 public:
  Split(int64_t channels, int64_t cond_channels, bool standard_normal, const std::string& name);

  struct Result {
    FlowState state;
    Var z;
    Var logp;  ///< (N, 1, 1, 1)
  };
  Result forward(const FlowState& s, const Var& u) const;
  /// Re-attaches a latent: `z` when given, else mean + temperature * std * eps.
  FlowState inverse(const FlowState& s, const Var& u, const std::optional<Tensor>& z, double temperature,
                    Rng* rng, Tensor* drawn = nullptr) const;
  void collect(const std::string& prefix, ParamList& out);
  bool standard_normal() const { return standard_normal_; }

  Conv prior;

 private:
  std::pair<Var, Var> prior_params(const Var& kept, const Var& u) const;
  int64_t channels_;
  bool standard_normal_;
};

/// Per-sample sum of log N(z; mean, exp(log_std)^2).
Var gaussian_log_density(const Var& z, const Var& mean, const Var& log_std);
/// Per-sample sum of log N(z; 0, I).
Var standard_normal_log_density(const Var& z);

}  // namespace ncsr
