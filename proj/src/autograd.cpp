#include "ncsr/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "ncsr/linalg.hpp"
#include "ncsr/resize.hpp"

namespace ncsr {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::atomic<uint64_t> g_seq{0};
thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

NodePtr make_leaf(Tensor t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = requires_grad;
  n->is_leaf = true;
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

/// Output node; records parents and the backward closure only when some
/// input needs a gradient and recording is enabled.
Var make_result(Tensor value, std::initializer_list<const Var*> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->is_leaf = false;
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var* v : inputs) needs = needs || v->requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    for (const Var* v : inputs) n->parents.push_back(v->node());
    n->backward_fn = std::move(fn);
  }
  return Var(std::move(n));
}

Var make_result_n(Tensor value, std::span<const Var> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->is_leaf = false;
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var& v : inputs) needs = needs || v.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    for (const Var& v : inputs) n->parents.push_back(v.node());
    n->backward_fn = std::move(fn);
  }
  return Var(std::move(n));
}

Tensor& grad_slot(Node& n) {
  if (n.grad.shape() != n.value.shape() || n.grad.empty() != n.value.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

/// Adds `g` into the parent's gradient when that parent is tracked.
void accumulate(Node& parent, const Tensor& g) {
  if (!parent.requires_grad) return;
  Tensor& dst = grad_slot(parent);
  double* d = dst.data();
  const double* s = g.data();
  for (int64_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* s = a.data();
  double* d = out.data();
  for (int64_t i = 0; i < a.size(); ++i) d[i] = f(s[i]);
  return out;
}

void check_channel_param(const Var& x, const Var& p, const char* what) {
  const Shape s = p.shape();
  if (s.n != 1 || s.h != 1 || s.w != 1 || s.c != x.shape().c) {
    throw ShapeError(std::string(what) + ": per-channel parameter " + s.str() + " does not fit input " +
                     x.shape().str());
  }
}

void im2col(const double* src, int64_t C, int64_t H, int64_t W, int64_t k, int stride, int pad, int64_t OH,
            int64_t OW, double* cols) {
  for (int64_t c = 0; c < C; ++c)
    for (int64_t ky = 0; ky < k; ++ky)
      for (int64_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((c * k + ky) * k + kx) * OH * OW;
        for (int64_t oy = 0; oy < OH; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          double* r = row + oy * OW;
          if (iy < 0 || iy >= H) {
            std::fill(r, r + OW, 0.0);
            continue;
          }
          const double* line = src + (c * H + iy) * W;
          for (int64_t ox = 0; ox < OW; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            r[ox] = (ix < 0 || ix >= W) ? 0.0 : line[ix];
          }
        }
      }
}

void col2im(const double* cols, int64_t C, int64_t H, int64_t W, int64_t k, int stride, int pad, int64_t OH,
            int64_t OW, double* dst) {
  for (int64_t c = 0; c < C; ++c)
    for (int64_t ky = 0; ky < k; ++ky)
      for (int64_t kx = 0; kx < k; ++kx) {
        const double* row = cols + ((c * k + ky) * k + kx) * OH * OW;
        for (int64_t oy = 0; oy < OH; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          double* line = dst + (c * H + iy) * W;
          const double* r = row + oy * OW;
          for (int64_t ox = 0; ox < OW; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) line[ix] += r[ox];
          }
        }
      }
}

}  // namespace

Var Var::constant(Tensor t) { return Var(make_leaf(std::move(t), false)); }
Var Var::parameter(Tensor t) { return Var(make_leaf(std::move(t), true)); }

Tensor Var::grad() const {
  if (!node_) return {};
  if (node_->grad.empty() && !node_->value.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& loss) {
  require(loss.defined(), "backward: undefined loss");
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + loss.shape().str());
  }
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    order.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->seq > b->seq; });
  for (Node* n : order)
    if (!n->is_leaf) grad_slot(*n).fill(0.0);

  Node& root = *loss.node();
  grad_slot(root)[0] += 1.0;
  for (Node* n : order)
    if (!n->is_leaf && n->backward_fn) n->backward_fn(*n);
}

Var detach(const Var& x) { return Var::constant(x.value()); }

Var add(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result(std::move(out), {&a, &b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result(std::move(out), {&a, &b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], map_unary(self.grad, [](double g) { return -g; }));
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {&a, &b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor g(av.shape());
      for (int64_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * bv[i];
      accumulate(*self.parents[0], g);
    }
    if (self.parents[1]->requires_grad) {
      Tensor g(bv.shape());
      for (int64_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * av[i];
      accumulate(*self.parents[1], g);
    }
  });
}

Var add_scalar(const Var& a, double s) {
  return make_result(map_unary(a.value(), [s](double v) { return v + s; }), {&a},
                     [](Node& self) { accumulate(*self.parents[0], self.grad); });
}

Var scale(const Var& a, double s) {
  return make_result(map_unary(a.value(), [s](double v) { return v * s; }), {&a}, [s](Node& self) {
    accumulate(*self.parents[0], map_unary(self.grad, [s](double g) { return g * s; }));
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var exp(const Var& a) {
  return make_result(map_unary(a.value(), [](double v) { return std::exp(v); }), {&a}, [](Node& self) {
    Tensor g(self.value.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * self.value[i];
    accumulate(*self.parents[0], g);
  });
}

Var square(const Var& a) {
  return make_result(map_unary(a.value(), [](double v) { return v * v; }), {&a}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    Tensor g(av.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = 2.0 * av[i] * self.grad[i];
    accumulate(*self.parents[0], g);
  });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var leaky_relu(const Var& a, double slope) {
  return make_result(map_unary(a.value(), [slope](double v) { return v > 0 ? v : slope * v; }), {&a},
                     [slope](Node& self) {
                       const Tensor& av = self.parents[0]->value;
                       Tensor g(av.shape());
                       for (int64_t i = 0; i < g.size(); ++i) g[i] = av[i] > 0 ? self.grad[i] : slope * self.grad[i];
                       accumulate(*self.parents[0], g);
                     });
}

Var bounded(const Var& a, double bound) {
  Tensor sig = map_unary(a.value(), [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Tensor out = map_unary(sig, [bound](double s) { return bound * (2.0 * s - 1.0); });
  return make_result(std::move(out), {&a}, [bound, sig = std::move(sig)](Node& self) {
    Tensor g(sig.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * 2.0 * bound * sig[i] * (1.0 - sig[i]);
    accumulate(*self.parents[0], g);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_result(Tensor::scalar(s), {&a}, [](Node& self) {
    accumulate(*self.parents[0], Tensor(self.parents[0]->value.shape(), self.grad[0]));
  });
}

Var sum_per_sample(const Var& a) {
  const Shape s = a.shape();
  const int64_t per = s.per_sample();
  Tensor out(Shape{s.n, 1, 1, 1});
  for (int64_t n = 0; n < s.n; ++n) {
    double acc = 0.0;
    const double* p = a.value().data() + n * per;
    for (int64_t i = 0; i < per; ++i) acc += p[i];
    out[n] = acc;
  }
  return make_result(std::move(out), {&a}, [](Node& self) {
    const Shape s = self.parents[0]->value.shape();
    const int64_t per = s.per_sample();
    Tensor g(s);
    for (int64_t n = 0; n < s.n; ++n) std::fill(g.data() + n * per, g.data() + (n + 1) * per, self.grad[n]);
    accumulate(*self.parents[0], g);
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var broadcast_batch(const Var& scalar, int64_t n) {
  if (scalar.value().size() != 1) throw ShapeError("broadcast_batch expects a scalar, got " + scalar.shape().str());
  return make_result(Tensor(Shape{n, 1, 1, 1}, scalar.value()[0]), {&scalar}, [](Node& self) {
    double s = 0.0;
    for (double g : self.grad.values()) s += g;
    accumulate(*self.parents[0], Tensor::scalar(s));
  });
}

Var channel_affine(const Var& x, const Var& scale_p, const Var& shift) {
  check_channel_param(x, scale_p, "channel_affine");
  check_channel_param(x, shift, "channel_affine");
  const Shape s = x.shape();
  const int64_t hw = s.plane();
  Tensor out(s);
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t c = 0; c < s.c; ++c) {
      const double sc = scale_p.value()[c], sh = shift.value()[c];
      const double* src = x.value().data() + (n * s.c + c) * hw;
      double* dst = out.data() + (n * s.c + c) * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] = sc * (src[i] + sh);
    }
  return make_result(std::move(out), {&x, &scale_p, &shift}, [](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& sv = self.parents[1]->value;
    const Tensor& bv = self.parents[2]->value;
    const Shape s = xv.shape();
    const int64_t hw = s.plane();
    Tensor gx(s), gs(sv.shape()), gb(bv.shape());
    for (int64_t n = 0; n < s.n; ++n)
      for (int64_t c = 0; c < s.c; ++c) {
        const int64_t off = (n * s.c + c) * hw;
        double as = 0.0, ab = 0.0;
        for (int64_t i = 0; i < hw; ++i) {
          const double g = self.grad[off + i];
          gx[off + i] = g * sv[c];
          as += g * (xv[off + i] + bv[c]);
          ab += g;
        }
        gs[c] += as;
        gb[c] += ab * sv[c];
      }
    accumulate(*self.parents[0], gx);
    accumulate(*self.parents[1], gs);
    accumulate(*self.parents[2], gb);
  });
}

Var channel_affine_inverse(const Var& y, const Var& scale_p, const Var& shift) {
  check_channel_param(y, scale_p, "channel_affine_inverse");
  check_channel_param(y, shift, "channel_affine_inverse");
  const Shape s = y.shape();
  const int64_t hw = s.plane();
  Tensor out(s);
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t c = 0; c < s.c; ++c) {
      const double sc = scale_p.value()[c], sh = shift.value()[c];
      const double* src = y.value().data() + (n * s.c + c) * hw;
      double* dst = out.data() + (n * s.c + c) * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] / sc - sh;
    }
  return make_result(std::move(out), {&y, &scale_p, &shift}, [](Node& self) {
    const Tensor& yv = self.parents[0]->value;
    const Tensor& sv = self.parents[1]->value;
    const Shape s = yv.shape();
    const int64_t hw = s.plane();
    Tensor gy(s), gs(sv.shape()), gb(sv.shape());
    for (int64_t n = 0; n < s.n; ++n)
      for (int64_t c = 0; c < s.c; ++c) {
        const int64_t off = (n * s.c + c) * hw;
        double as = 0.0, ab = 0.0;
        for (int64_t i = 0; i < hw; ++i) {
          const double g = self.grad[off + i];
          gy[off + i] = g / sv[c];
          as -= g * yv[off + i] / (sv[c] * sv[c]);
          ab -= g;
        }
        gs[c] += as;
        gb[c] += ab;
      }
    accumulate(*self.parents[0], gy);
    accumulate(*self.parents[1], gs);
    accumulate(*self.parents[2], gb);
  });
}

Var sum_log_abs(const Var& a) {
  double s = 0.0;
  for (int64_t i = 0; i < a.value().size(); ++i) {
    const double v = a.value()[i];
    if (v == 0.0) throw Error(ErrorKind::kInvalidArgument, "sum_log_abs: entry " + std::to_string(i) + " is zero");
    s += std::log(std::abs(v));
  }
  return make_result(Tensor::scalar(s), {&a}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    Tensor g(av.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = self.grad[0] / av[i];
    accumulate(*self.parents[0], g);
  });
}

Var log_abs_det(const Var& weight) {
  const SquareMatrix m = SquareMatrix::from_conv_weight(weight.value());
  LogDetInverse ldi = logdet_and_inverse(m);
  return make_result(Tensor::scalar(ldi.log_abs_det), {&weight}, [inv = std::move(ldi.inverse)](Node& self) {
    const int d = inv.dim();
    Tensor g(Shape{d, d, 1, 1});
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g[i * d + j] = self.grad[0] * inv(j, i);
    accumulate(*self.parents[0], g);
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ShapeError("conv2d: input " + xs.str() + " incompatible with weight " + ws.str());
  }
  if (bias.defined() && (bias.shape() != Shape{1, ws.n, 1, 1})) {
    throw ShapeError("conv2d: bias " + bias.shape().str() + " incompatible with weight " + ws.str());
  }
  require(stride >= 1 && pad >= 0, "conv2d: stride must be >= 1 and pad >= 0");
  const int64_t k = ws.h;
  const int64_t OH = (xs.h + 2 * pad - k) / stride + 1;
  const int64_t OW = (xs.w + 2 * pad - k) / stride + 1;
  if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: kernel larger than padded input " + xs.str());
  const int64_t K = xs.c * k * k;
  const int64_t P = OH * OW;
  const bool direct = (k == 1 && stride == 1 && pad == 0);

  Tensor out(Shape{xs.n, ws.n, OH, OW});
  ConstMap W(weight.value().data(), ws.n, K);
  RowMat cols(direct ? 0 : K, direct ? 0 : P);
  for (int64_t n = 0; n < xs.n; ++n) {
    const double* src = x.value().data() + n * xs.per_sample();
    MutMap dst(out.data() + n * ws.n * P, ws.n, P);
    if (direct) {
      dst.noalias() = W * ConstMap(src, K, P);
    } else {
      im2col(src, xs.c, xs.h, xs.w, k, stride, pad, OH, OW, cols.data());
      dst.noalias() = W * cols;
    }
    if (bias.defined()) {
      for (int64_t o = 0; o < ws.n; ++o) dst.row(o).array() += bias.value()[o];
    }
  }

  const bool has_bias = bias.defined();
  auto fn = [stride, pad, k, OH, OW, K, P, direct, has_bias](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    const Shape xs = xn.value.shape();
    const Shape ws = wn.value.shape();
    ConstMap W(wn.value.data(), ws.n, K);
    Tensor gx = xn.requires_grad ? Tensor(xs) : Tensor();
    RowMat gw = RowMat::Zero(wn.requires_grad ? ws.n : 0, wn.requires_grad ? K : 0);
    Tensor gb = has_bias ? Tensor(Shape{1, ws.n, 1, 1}) : Tensor();
    RowMat cols(direct ? 0 : K, direct ? 0 : P);
    RowMat dcols(direct ? 0 : K, direct ? 0 : P);
    for (int64_t n = 0; n < xs.n; ++n) {
      ConstMap G(self.grad.data() + n * ws.n * P, ws.n, P);
      const double* src = xn.value.data() + n * xs.per_sample();
      if (wn.requires_grad) {
        if (direct) {
          gw.noalias() += G * ConstMap(src, K, P).transpose();
        } else {
          im2col(src, xs.c, xs.h, xs.w, k, stride, pad, OH, OW, cols.data());
          gw.noalias() += G * cols.transpose();
        }
      }
      if (has_bias) {
        for (int64_t o = 0; o < ws.n; ++o) gb[o] += G.row(o).sum();
      }
      if (xn.requires_grad) {
        double* gdst = gx.data() + n * xs.per_sample();
        if (direct) {
          MutMap(gdst, K, P).noalias() = W.transpose() * G;
        } else {
          dcols.noalias() = W.transpose() * G;
          col2im(dcols.data(), xs.c, xs.h, xs.w, k, stride, pad, OH, OW, gdst);
        }
      }
    }
    if (xn.requires_grad) accumulate(xn, gx);
    if (wn.requires_grad) accumulate(wn, Tensor(ws, std::vector<double>(gw.data(), gw.data() + gw.size())));
    if (has_bias) accumulate(*self.parents[2], gb);
  };
  if (has_bias) return make_result(std::move(out), {&x, &weight, &bias}, fn);
  return make_result(std::move(out), {&x, &weight}, fn);
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_channels of zero tensors");
  Shape s = parts.front().shape();
  s.c = 0;
  for (const Var& p : parts) {
    const Shape q = p.shape();
    if (q.n != s.n || q.h != s.h || q.w != s.w) {
      throw ShapeError("concat_channels: " + parts.front().shape().str() + " vs " + q.str());
    }
    s.c += q.c;
  }
  Tensor out(s);
  const int64_t hw = s.plane();
  for (int64_t n = 0; n < s.n; ++n) {
    double* dst = out.data() + n * s.per_sample();
    for (const Var& p : parts) {
      const int64_t len = p.shape().c * hw;
      const double* src = p.value().data() + n * len;
      std::copy(src, src + len, dst);
      dst += len;
    }
  }
  return make_result_n(std::move(out), parts, [](Node& self) {
    const Shape s = self.value.shape();
    const int64_t hw = s.plane();
    int64_t c0 = 0;
    for (auto& pp : self.parents) {
      const Shape q = pp->value.shape();
      if (pp->requires_grad) {
        Tensor g(q);
        for (int64_t n = 0; n < s.n; ++n) {
          const double* src = self.grad.data() + n * s.per_sample() + c0 * hw;
          std::copy(src, src + q.c * hw, g.data() + n * q.per_sample());
        }
        accumulate(*pp, g);
      }
      c0 += q.c;
    }
  });
}

Var slice_channels(const Var& x, int64_t start, int64_t count) {
  const Shape s = x.shape();
  if (start < 0 || count <= 0 || start + count > s.c) {
    throw ShapeError("slice_channels [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + s.str());
  }
  Shape o = s;
  o.c = count;
  Tensor out(o);
  const int64_t hw = s.plane();
  for (int64_t n = 0; n < s.n; ++n) {
    const double* src = x.value().data() + n * s.per_sample() + start * hw;
    std::copy(src, src + count * hw, out.data() + n * o.per_sample());
  }
  return make_result(std::move(out), {&x}, [start, count](Node& self) {
    const Shape s = self.parents[0]->value.shape();
    const int64_t hw = s.plane();
    Tensor g(s);
    for (int64_t n = 0; n < s.n; ++n) {
      const double* src = self.grad.data() + n * count * hw;
      std::copy(src, src + count * hw, g.data() + n * s.per_sample() + start * hw);
    }
    accumulate(*self.parents[0], g);
  });
}

namespace {

// dir > 0: squeeze (scatter src pixel into dst channel), dir < 0: inverse.
void squeeze_copy(const Tensor& src, Tensor& dst, bool forward) {
  const Shape big = forward ? src.shape() : dst.shape();
  const int64_t H2 = big.h / 2, W2 = big.w / 2;
  for (int64_t n = 0; n < big.n; ++n)
    for (int64_t c = 0; c < big.c; ++c)
      for (int64_t i = 0; i < big.h; ++i)
        for (int64_t j = 0; j < big.w; ++j) {
          const int64_t sub = (i % 2) * 2 + (j % 2);
          const int64_t bi = ((n * big.c + c) * big.h + i) * big.w + j;
          const int64_t si = ((n * big.c * 4 + c * 4 + sub) * H2 + i / 2) * W2 + j / 2;
          if (forward) dst[si] = src[bi];
          else dst[bi] = src[si];
        }
}

}  // namespace

Var squeeze2(const Var& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("squeeze needs even height and width, got " + s.str());
  Tensor out(Shape{s.n, s.c * 4, s.h / 2, s.w / 2});
  squeeze_copy(x.value(), out, true);
  return make_result(std::move(out), {&x}, [](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    squeeze_copy(self.grad, g, false);
    accumulate(*self.parents[0], g);
  });
}

Var unsqueeze2(const Var& x) {
  const Shape s = x.shape();
  if (s.c % 4 != 0) throw ShapeError("unsqueeze needs channels divisible by 4, got " + s.str());
  Tensor out(Shape{s.n, s.c / 4, s.h * 2, s.w * 2});
  squeeze_copy(x.value(), out, false);
  return make_result(std::move(out), {&x}, [](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    squeeze_copy(self.grad, g, true);
    accumulate(*self.parents[0], g);
  });
}

Var resample(const Var& x, const Resampler& r) {
  return make_result(r.apply(x.value()), {&x}, [r](Node& self) {
    accumulate(*self.parents[0], r.apply_transpose(self.grad));
  });
}

}  // namespace ncsr
