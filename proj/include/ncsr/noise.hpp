#pragma once

#include <vector>

#include "ncsr/model.hpp"
#include "ncsr/rng.hpp"

namespace ncsr {

/// One noise draw per batch element: c_i ~ U[0, M), v ~ N(0, c_i^2) at HR
/// shape, and w = area_downsample(v) at LR shape.
struct NoiseSample {
  std::vector<double> c;
  Tensor v;
  Tensor w;
  double M = 0.0;

  /// Conditioning view handed to the model.
  NoiseCond cond() const { return NoiseCond{v, c}; }
};

NoiseSample draw_noise(Rng& rng, Shape hr_shape, Shape lr_shape, double M);

struct Perturbed {
  Tensor x_plus;
  Tensor y_plus;
};

/// x + v and y + w, no clamping.
Perturbed perturb(const Tensor& x, const Tensor& y, const NoiseSample& ns);

/// Adds U[0, 1/256) to every element.
Tensor dequantize(const Tensor& x, Rng& rng);

/// All-zero sample used for sampling and evaluation.
NoiseSample inference_condition(Shape hr_shape, Shape lr_shape);

}  // namespace ncsr
