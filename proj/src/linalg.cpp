#include "ncsr/linalg.hpp"

#include <cmath>
#include <numeric>

#include "ncsr/rng.hpp"

namespace ncsr {

SquareMatrix::SquareMatrix(int dim, double fill) : dim_(dim), a_(static_cast<size_t>(dim) * dim, fill) {
  require(dim > 0, "SquareMatrix: dim must be positive");
}

SquareMatrix::SquareMatrix(int dim, std::vector<double> entries) : dim_(dim), a_(std::move(entries)) {
  require(dim > 0, "SquareMatrix: dim must be positive");
  if (a_.size() != static_cast<size_t>(dim) * dim) {
    throw ShapeError("SquareMatrix: expected " + std::to_string(dim * dim) + " entries, got " +
                     std::to_string(a_.size()));
  }
}

SquareMatrix SquareMatrix::identity(int dim) {
  SquareMatrix m(dim);
  for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

SquareMatrix SquareMatrix::from_conv_weight(const Tensor& w) {
  const Shape s = w.shape();
  if (s.n != s.c || s.h != 1 || s.w != 1) throw ShapeError("expected (C, C, 1, 1) weight, got " + s.str());
  return SquareMatrix(static_cast<int>(s.n), std::vector<double>(w.vec().begin(), w.vec().end()));
}

Tensor SquareMatrix::to_conv_weight() const { return Tensor(Shape{dim_, dim_, 1, 1}, a_); }

SquareMatrix SquareMatrix::operator*(const SquareMatrix& o) const {
  if (o.dim_ != dim_) throw ShapeError("matrix product of mismatched dims");
  SquareMatrix r(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int k = 0; k < dim_; ++k) {
      const double aik = (*this)(i, k);
      for (int j = 0; j < dim_; ++j) r(i, j) += aik * o(k, j);
    }
  return r;
}

SquareMatrix SquareMatrix::transposed() const {
  SquareMatrix r(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) r(j, i) = (*this)(i, j);
  return r;
}

LogDetInverse logdet_and_inverse(const SquareMatrix& m) {
  const int n = m.dim();
  SquareMatrix lu = m;
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double scale = 0.0;
  for (double v : m.entries()) scale = std::max(scale, std::abs(v));
  const double pivot_tol = 1e-12 * std::max(scale, 1e-300);

  LogDetInverse out;
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(p, k))) p = i;
    if (!(std::abs(lu(p, k)) > pivot_tol)) {
      throw SingularError("matrix is singular: pivot " + std::to_string(k) + " is " +
                              std::to_string(lu(p, k)),
                          k);
    }
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(p, j));
      std::swap(perm[static_cast<size_t>(k)], perm[static_cast<size_t>(p)]);
      out.sign = -out.sign;
    }
    const double piv = lu(k, k);
    if (piv < 0) out.sign = -out.sign;
    out.log_abs_det += std::log(std::abs(piv));
    for (int i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / piv;
      lu(i, k) = f;
      for (int j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
    }
  }
  if (!(out.log_abs_det > std::log(1e-12))) {
    int smallest = 0;
    for (int k = 1; k < n; ++k)
      if (std::abs(lu(k, k)) < std::abs(lu(smallest, smallest))) smallest = k;
    throw SingularError("matrix is singular within tolerance: |det| <= 1e-12, smallest pivot " +
                            std::to_string(smallest),
                        smallest);
  }

  // Solve LU x = P e_j column by column.
  out.inverse = SquareMatrix(n);
  std::vector<double> col(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) col[static_cast<size_t>(i)] = perm[static_cast<size_t>(i)] == j ? 1.0 : 0.0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < i; ++k) col[static_cast<size_t>(i)] -= lu(i, k) * col[static_cast<size_t>(k)];
    for (int i = n - 1; i >= 0; --i) {
      for (int k = i + 1; k < n; ++k) col[static_cast<size_t>(i)] -= lu(i, k) * col[static_cast<size_t>(k)];
      col[static_cast<size_t>(i)] /= lu(i, i);
    }
    for (int i = 0; i < n; ++i) out.inverse(i, j) = col[static_cast<size_t>(i)];
  }
  return out;
}

SquareMatrix random_orthogonal(int dim, Rng& rng) {
  SquareMatrix a(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
  // modified Gram-Schmidt on columns, sign fixed so R has a positive diagonal
  SquareMatrix q(dim);
  for (int j = 0; j < dim; ++j) {
    std::vector<double> v(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) v[static_cast<size_t>(i)] = a(i, j);
    for (int k = 0; k < j; ++k) {
      double d = 0.0;
      for (int i = 0; i < dim; ++i) d += q(i, k) * v[static_cast<size_t>(i)];
      for (int i = 0; i < dim; ++i) v[static_cast<size_t>(i)] -= d * q(i, k);
    }
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (int i = 0; i < dim; ++i) q(i, j) = v[static_cast<size_t>(i)] / nrm;
  }
  return q;
}

}  // namespace ncsr
