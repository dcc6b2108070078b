#include "ncsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ncsr {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative tensor dimension " + shape.str());
  }
  data_.assign(static_cast<size_t>(shape.count()), fill);
}

Tensor::Tensor(Shape shape, const std::vector<double>& values)
    : Tensor(shape, Storage(values.begin(), values.end())) {}

Tensor::Tensor(Shape shape, Storage values) : shape_(shape), data_(std::move(values)) {
  if (static_cast<int64_t>(data_.size()) != shape.count()) {
    throw ShapeError("value count " + std::to_string(data_.size()) + " does not match shape " + shape.str());
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_.str());
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.count() != shape_.count()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

Tensor Tensor::batch_slice(int64_t start, int64_t count) const {
  if (start < 0 || count < 0 || start + count > shape_.n) {
    throw ShapeError("batch slice out of range for " + shape_.str());
  }
  Shape s = shape_;
  s.n = count;
  const auto per = shape_.per_sample();
  Storage v(data_.begin() + start * per, data_.begin() + (start + count) * per);
  return Tensor(s, std::move(v));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

void check_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite()) throw NumericError(where, "non-finite value produced by " + where);
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_batch of zero tensors");
  Shape s = parts.front().shape();
  s.n = 0;
  for (const auto& p : parts) {
    Shape q = p.shape();
    if (q.c != s.c || q.h != s.h || q.w != s.w) {
      throw ShapeError("concat_batch: " + parts.front().shape().str() + " vs " + q.str());
    }
    s.n += q.n;
  }
  Storage v;
  v.reserve(static_cast<size_t>(s.count()));
  for (const auto& p : parts) v.insert(v.end(), p.vec().begin(), p.vec().end());
  return Tensor(s, std::move(v));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double mean(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return t.empty() ? 0.0 : s / static_cast<double>(t.size());
}

}  // namespace ncsr
