#include "ncsr/resize.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace ncsr {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
}  // namespace

double cubic_kernel(double x, double a) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

std::vector<double> cubic_weights(int64_t in, int64_t out, double a) {
  require(in > 0 && out > 0, "cubic_weights: sizes must be positive");
  std::vector<double> m(static_cast<size_t>(in * out), 0.0);
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double stretch = scale < 1.0 ? scale : 1.0;
  const double support = 2.0 / stretch;
  for (int64_t i = 0; i < out; ++i) {
    const double center = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto lo = static_cast<int64_t>(std::floor(center - support));
    const auto hi = static_cast<int64_t>(std::ceil(center + support));
    double total = 0.0;
    double* row = m.data() + i * in;
    for (int64_t j = lo; j <= hi; ++j) {
      const double wgt = cubic_kernel((static_cast<double>(j) - center) * stretch, a);
      if (wgt == 0.0) continue;
      row[std::clamp<int64_t>(j, 0, in - 1)] += wgt;
      total += wgt;
    }
    for (int64_t j = 0; j < in; ++j) row[j] /= total;
  }
  return m;
}

Resampler::Resampler(int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w, double a)
    : in_h_(in_h), in_w_(in_w), out_h_(out_h), out_w_(out_w),
      rh_(cubic_weights(in_h, out_h, a)), rw_(cubic_weights(in_w, out_w, a)) {}

Tensor Resampler::apply(const Tensor& x) const {
  const Shape s = x.shape();
  if (s.h != in_h_ || s.w != in_w_) {
    throw ShapeError("Resampler expects planes " + std::to_string(in_h_) + "x" + std::to_string(in_w_) +
                     ", got " + s.str());
  }
  Tensor out(Shape{s.n, s.c, out_h_, out_w_});
  ConstMap rh(rh_.data(), out_h_, in_h_);
  ConstMap rw(rw_.data(), out_w_, in_w_);
  RowMat tmp(out_h_, in_w_);
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    ConstMap plane(x.data() + p * in_h_ * in_w_, in_h_, in_w_);
    MutMap dst(out.data() + p * out_h_ * out_w_, out_h_, out_w_);
    tmp.noalias() = rh * plane;
    dst.noalias() = tmp * rw.transpose();
  }
  return out;
}

Tensor Resampler::apply_transpose(const Tensor& g) const {
  const Shape s = g.shape();
  if (s.h != out_h_ || s.w != out_w_) throw ShapeError("Resampler adjoint: unexpected shape " + s.str());
  Tensor out(Shape{s.n, s.c, in_h_, in_w_});
  ConstMap rh(rh_.data(), out_h_, in_h_);
  ConstMap rw(rw_.data(), out_w_, in_w_);
  RowMat tmp(in_h_, out_w_);
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    ConstMap plane(g.data() + p * out_h_ * out_w_, out_h_, out_w_);
    MutMap dst(out.data() + p * in_h_ * in_w_, in_h_, in_w_);
    tmp.noalias() = rh.transpose() * plane;
    dst.noalias() = tmp * rw;
  }
  return out;
}

Tensor bicubic_resize(const Tensor& x, int num, int den, double a) {
  require(num > 0 && den > 0, "bicubic_resize: scale must be positive");
  const Shape s = x.shape();
  if ((s.h * num) % den != 0 || (s.w * num) % den != 0) {
    throw ShapeError("bicubic_resize: " + s.str() + " scaled by " + std::to_string(num) + "/" +
                     std::to_string(den) + " is not integral");
  }
  return Resampler(s.h, s.w, s.h * num / den, s.w * num / den, a).apply(x);
}

Tensor area_downsample(const Tensor& x, int factor) {
  require(factor >= 1, "area_downsample: factor must be >= 1");
  const Shape s = x.shape();
  if (s.h % factor != 0 || s.w % factor != 0) {
    throw ShapeError("area_downsample: " + s.str() + " not divisible by " + std::to_string(factor));
  }
  const int64_t oh = s.h / factor, ow = s.w / factor;
  Tensor out(Shape{s.n, s.c, oh, ow});
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    const double* src = x.data() + p * s.h * s.w;
    double* dst = out.data() + p * oh * ow;
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) acc += src[(i * factor + dy) * s.w + j * factor + dx];
        dst[i * ow + j] = acc * inv;
      }
  }
  return out;
}

Tensor rot90(const Tensor& x, int k) {
  const Shape s = x.shape();
  k = ((k % 4) + 4) % 4;
  if (k == 0) return x;
  if (k != 2 && s.h != s.w) throw ShapeError("rot90 by odd multiples needs square planes, got " + s.str());
  Tensor out(Shape{s.n, s.c, k == 2 ? s.h : s.w, k == 2 ? s.w : s.h});
  const int64_t H = s.h, W = s.w;
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    const double* src = x.data() + p * H * W;
    double* dst = out.data() + p * H * W;
    for (int64_t i = 0; i < H; ++i)
      for (int64_t j = 0; j < W; ++j) {
        const double v = src[i * W + j];
        if (k == 1) dst[(W - 1 - j) * H + i] = v;
        else if (k == 2) dst[(H - 1 - i) * W + (W - 1 - j)] = v;
        else dst[j * H + (H - 1 - i)] = v;
      }
  }
  return out;
}

Tensor flip_horizontal(const Tensor& x) {
  const Shape s = x.shape();
  Tensor out(s);
  for (int64_t p = 0; p < s.n * s.c; ++p)
    for (int64_t i = 0; i < s.h; ++i)
      for (int64_t j = 0; j < s.w; ++j)
        out.data()[(p * s.h + i) * s.w + j] = x.data()[(p * s.h + i) * s.w + (s.w - 1 - j)];
  return out;
}

}  // namespace ncsr
