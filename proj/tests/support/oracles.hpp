#pragma once

// Independent reference implementations used as test oracles. None of these
// call into the library's numerics; they are deliberately naive.

#include <functional>
#include <vector>

#include "ncsr/autograd.hpp"
#include "ncsr/tensor.hpp"

namespace oracle {

using ncsr::Shape;
using ncsr::Tensor;

using Matrix = std::vector<std::vector<double>>;

/// Laplace expansion along the first row. Fine up to ~8x8.
double cofactor_det(const Matrix& m);
/// Gaussian elimination with partial pivoting, log|det|.
double elimination_log_abs_det(Matrix m);

/// Scalar-loop cross-correlation with zero padding.
Tensor naive_conv2d(const Tensor& x, const Tensor& w, const std::vector<double>& bias, int stride, int pad);

/// Central-difference Jacobian (outputs x inputs) of f at x.
Matrix fd_jacobian(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

/// Keys kernel with a = -0.5, evaluated directly.
double keys(double t);
/// Weight matrix for shrinking `in` samples to `in / factor` with a kernel
/// stretched by `factor`, replicate edges, rows normalised. Written from
/// the definition, one tap at a time.
Matrix shrink_taps(int in, int factor);

double naive_psnr(const Tensor& a, const Tensor& b);

/// max |a - n| / max(|a|, |n|, floor) over every parameter element probed.
struct GradCheck {
  double worst_rel = 0.0;
  int probes = 0;
};

/// Compares the tape gradient of `loss()` w.r.t. `leaf` against central
/// differences at `probes` random elements (all of them if probes <= 0).
GradCheck check_gradient(const std::function<ncsr::Var()>& loss, ncsr::Var& leaf, int probes, uint64_t seed,
                         double h = 1e-5, double floor = 1e-6);

/// Uniform(lo, hi) tensor from std::mt19937_64 (independent of the library RNG).
Tensor random_tensor(Shape s, uint64_t seed, double lo = -1.0, double hi = 1.0);

}  // namespace oracle
