#pragma once

#include <vector>

#include "ncsr/tensor.hpp"

namespace ncsr {

/// Keys cubic convolution kernel; a = -0.5 gives Catmull-Rom.
double cubic_kernel(double x, double a);

/// Separable linear resampling operator: out = Rh * plane * Rw^T for every
/// (n, c) plane. Bicubic weights use half-pixel centres, replicate (clamped)
/// edges, and a stretched kernel when shrinking so downsampling is
/// antialiased. Each row of weights sums to one.
class Resampler {
 public:
  Resampler(int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w, double a = -0.5);

  int64_t in_h() const { return in_h_; }
  int64_t in_w() const { return in_w_; }
  int64_t out_h() const { return out_h_; }
  int64_t out_w() const { return out_w_; }
  /// out_h x in_h, row-major.
  const std::vector<double>& rows() const { return rh_; }
  /// out_w x in_w, row-major.
  const std::vector<double>& cols() const { return rw_; }

  Tensor apply(const Tensor& x) const;
  /// Adjoint map, used for gradients.
  Tensor apply_transpose(const Tensor& g) const;

 private:
  int64_t in_h_, in_w_, out_h_, out_w_;
  std::vector<double> rh_, rw_;
};

/// 1-D weight matrix (out x in) for cubic resampling.
std::vector<double> cubic_weights(int64_t in, int64_t out, double a);

/// Resize by the rational factor num/den. Throws when the output size is
/// not integral.
Tensor bicubic_resize(const Tensor& x, int num, int den, double a = -0.5);

/// Mean over non-overlapping factor x factor blocks.
Tensor area_downsample(const Tensor& x, int factor);

/// Rotate every plane by k * 90 degrees counter-clockwise (square planes).
Tensor rot90(const Tensor& x, int k);
Tensor flip_horizontal(const Tensor& x);

}  // namespace ncsr
