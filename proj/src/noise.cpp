#include "ncsr/noise.hpp"

#include <cmath>

#include "ncsr/resize.hpp"

namespace ncsr {

NoiseSample draw_noise(Rng& rng, Shape hr_shape, Shape lr_shape, double M) {
  require(M >= 0.0 && std::isfinite(M), "noise bound M must be a finite value >= 0");
  require(hr_shape.n == lr_shape.n && hr_shape.c == lr_shape.c, "noise: HR/LR batch or channels differ");
  require(lr_shape.h > 0 && hr_shape.h % lr_shape.h == 0 && hr_shape.w % lr_shape.w == 0 &&
              hr_shape.h / lr_shape.h == hr_shape.w / lr_shape.w,
          "noise: HR shape " + hr_shape.str() + " is not an integer multiple of LR " + lr_shape.str());
  const int factor = static_cast<int>(hr_shape.h / lr_shape.h);

  NoiseSample ns;
  ns.M = M;
  ns.c.resize(static_cast<size_t>(hr_shape.n));
  ns.v = Tensor::zeros(hr_shape);
  Shape one{1, hr_shape.c, hr_shape.h, hr_shape.w};
  for (int64_t i = 0; i < hr_shape.n; ++i) {
    const double c = M * rng.uniform();
    ns.c[static_cast<size_t>(i)] = c;
    Tensor vi = gaussian(rng, one, c);
    std::copy(vi.data(), vi.data() + vi.size(), ns.v.data() + i * one.count());
  }
  ns.w = area_downsample(ns.v, factor);
  return ns;
}

Perturbed perturb(const Tensor& x, const Tensor& y, const NoiseSample& ns) {
  check_same_shape(x, ns.v, "perturb: x vs v");
  check_same_shape(y, ns.w, "perturb: y vs w");
  Perturbed p{x, y};
  for (int64_t i = 0; i < x.size(); ++i) p.x_plus[i] += ns.v[i];
  for (int64_t i = 0; i < y.size(); ++i) p.y_plus[i] += ns.w[i];
  return p;
}

Tensor dequantize(const Tensor& x, Rng& rng) {
  Tensor out = x;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += rng.uniform() / 256.0;
  return out;
}

NoiseSample inference_condition(Shape hr_shape, Shape lr_shape) {
  NoiseSample ns;
  ns.c.assign(static_cast<size_t>(hr_shape.n), 0.0);
  ns.v = Tensor::zeros(hr_shape);
  ns.w = Tensor::zeros(lr_shape);
  return ns;
}

}  // namespace ncsr
