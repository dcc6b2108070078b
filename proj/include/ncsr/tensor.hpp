#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "ncsr/error.hpp"

namespace ncsr {

/// (batch, channels, height, width). All tensors in the library are 4-D.
struct Shape {
  int64_t n = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  int64_t count() const { return n * c * h * w; }
  int64_t plane() const { return h * w; }
  int64_t per_sample() const { return c * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// 64-byte aligned storage. Eigen picks vectorised paths by address
/// alignment, so fixing it makes results depend on shapes alone.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major NCHW array of doubles with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, const std::vector<double>& values);
  Tensor(Shape shape, Storage values);
  Tensor(Shape shape, std::initializer_list<double> values) : Tensor(shape, Storage(values)) {}

  static Tensor zeros(Shape shape) { return Tensor(shape, 0.0); }
  static Tensor full(Shape shape, double v) { return Tensor(shape, v); }
  /// 1x1x1x1 tensor holding `v`.
  static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const Storage& vec() const { return data_; }

  int64_t index(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(int64_t n, int64_t c, int64_t h, int64_t w) { return data_[index(n, c, h, w)]; }
  double at(int64_t n, int64_t c, int64_t h, int64_t w) const { return data_[index(n, c, h, w)]; }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  /// Only value for a 1-element tensor.
  double item() const;

  /// Same data reinterpreted under a new shape with equal count.
  Tensor reshaped(Shape shape) const;
  /// Samples [start, start+count) along the batch axis.
  Tensor batch_slice(int64_t start, int64_t count) const;

  bool all_finite() const;
  void fill(double v);

 private:
  Shape shape_{};
  Storage data_;
};

/// Throws ShapeError naming both shapes when they differ.
void check_same_shape(const Tensor& a, const Tensor& b, const char* what);
/// Throws NumericError naming `where` on NaN/Inf.
void check_finite(const Tensor& t, const std::string& where);

/// Concatenate along the batch axis.
Tensor concat_batch(std::span<const Tensor> parts);
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean(const Tensor& t);

}  // namespace ncsr
