#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ncsr/tensor.hpp"

namespace ncsr {

class Resampler;

/// One recorded operation. Nodes are created in a global sequence so a
/// reverse walk in creation order is a valid topological order.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool is_leaf = true;
  uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
};

/// Handle onto a node in the gradient tape. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor t);
  /// Leaf that accumulates gradients until zero_grad().
  static Var parameter(Tensor t);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// Direct access for optimizers and initializers; never call mid-graph.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  /// Gradient; all zeros when nothing has been accumulated yet.
  Tensor grad() const;
  void zero_grad();
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; intermediate gradients are recomputed each call.
void backward(const Var& loss);

Var detach(const Var& x);

// Element-wise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var scale(const Var& a, double s);
Var neg(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
/// bound * (2 sigmoid(a) - 1), a smooth map onto (-bound, bound) with unit
/// slope at zero when bound == 2.
Var bounded(const Var& a, double bound);

// Reductions.
Var sum(const Var& a);
/// (N, C, H, W) -> (N, 1, 1, 1)
Var sum_per_sample(const Var& a);
Var mean(const Var& a);
/// (1, 1, 1, 1) -> (n, 1, 1, 1)
Var broadcast_batch(const Var& scalar, int64_t n);

// Per-channel parameters of shape (1, C, 1, 1).
/// scale * (x + shift)
Var channel_affine(const Var& x, const Var& scale, const Var& shift);
/// y / scale - shift
Var channel_affine_inverse(const Var& y, const Var& scale, const Var& shift);
/// sum_c log|a_c| as a scalar; throws on a zero entry.
Var sum_log_abs(const Var& a);

/// log|det W| of a (C, C, 1, 1) weight, gradient W^-T.
Var log_abs_det(const Var& weight);

/// Cross-correlation. weight (Cout, Cin, kH, kW), bias (1, Cout, 1, 1) or
/// undefined. Output side (in + 2 pad - k) / stride + 1.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);

Var concat_channels(std::span<const Var> parts);
Var slice_channels(const Var& x, int64_t start, int64_t count);

/// (C, H, W) -> (4C, H/2, W/2); channel c*4 + dy*2 + dx holds pixel (2i+dy, 2j+dx).
Var squeeze2(const Var& x);
Var unsqueeze2(const Var& x);

/// Separable linear resampling of every (n, c) plane.
Var resample(const Var& x, const Resampler& r);

}  // namespace ncsr
