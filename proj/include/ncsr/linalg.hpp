#pragma once

#include <vector>

#include "ncsr/tensor.hpp"

namespace ncsr {

/// Dense row-major square matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(int dim, double fill = 0.0);
  SquareMatrix(int dim, std::vector<double> entries);

  static SquareMatrix identity(int dim);
  /// Reads a (C, C, 1, 1) convolution weight.
  static SquareMatrix from_conv_weight(const Tensor& w);
  Tensor to_conv_weight() const;

  int dim() const { return dim_; }
  double& operator()(int i, int j) { return a_[static_cast<size_t>(i * dim_ + j)]; }
  double operator()(int i, int j) const { return a_[static_cast<size_t>(i * dim_ + j)]; }
  const std::vector<double>& entries() const { return a_; }

  SquareMatrix operator*(const SquareMatrix& o) const;
  SquareMatrix transposed() const;

 private:
  int dim_ = 0;
  std::vector<double> a_;
};

struct LogDetInverse {
  double log_abs_det = 0.0;
  int sign = 1;
  SquareMatrix inverse;
};

/// log|det m| and m^-1 by LU with partial pivoting. Throws SingularError
/// naming the failing pivot when |det| <= 1e-12 or a pivot vanishes.
LogDetInverse logdet_and_inverse(const SquareMatrix& m);

/// Orthonormalized Gaussian draw; initial weight for 1x1 convolutions.
SquareMatrix random_orthogonal(int dim, class Rng& rng);

}  // namespace ncsr
