#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace oracle {

double cofactor_det(const Matrix& m) {
  const size_t n = m.size();
  if (n == 1) return m[0][0];
  if (n == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  double det = 0.0;
  for (size_t j = 0; j < n; ++j) {
    Matrix minor;
    for (size_t r = 1; r < n; ++r) {
      std::vector<double> row;
      for (size_t c = 0; c < n; ++c) {
        if (c != j) row.push_back(m[r][c]);
      }
      minor.push_back(row);
    }
    det += ((j % 2 == 0) ? 1.0 : -1.0) * m[0][j] * cofactor_det(minor);
  }
  return det;
}

double elimination_log_abs_det(Matrix m) {
  const size_t n = m.size();
  double acc = 0.0;
  for (size_t k = 0; k < n; ++k) {
    size_t p = k;
    for (size_t r = k + 1; r < n; ++r) {
      if (std::abs(m[r][k]) > std::abs(m[p][k])) p = r;
    }
    std::swap(m[k], m[p]);
    acc += std::log(std::abs(m[k][k]));
    for (size_t r = k + 1; r < n; ++r) {
      const double f = m[r][k] / m[k][k];
      for (size_t c = k; c < n; ++c) m[r][c] -= f * m[k][c];
    }
  }
  return acc;
}

Tensor naive_conv2d(const Tensor& x, const Tensor& w, const std::vector<double>& bias, int stride, int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  const int64_t oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  const int64_t ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  Tensor out(Shape{xs.n, ws.n, oh, ow});
  for (int64_t n = 0; n < xs.n; ++n)
    for (int64_t o = 0; o < ws.n; ++o)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          double s = bias.empty() ? 0.0 : bias[static_cast<size_t>(o)];
          for (int64_t c = 0; c < ws.c; ++c)
            for (int64_t di = 0; di < ws.h; ++di)
              for (int64_t dj = 0; dj < ws.w; ++dj) {
                const int64_t yi = i * stride + di - pad, xj = j * stride + dj - pad;
                if (yi < 0 || yi >= xs.h || xj < 0 || xj >= xs.w) continue;
                s += x.at(n, c, yi, xj) * w.at(o, c, di, dj);
              }
          out.at(n, o, i, j) = s;
        }
  return out;
}

Matrix fd_jacobian(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  const Tensor f0 = f(x);
  Matrix jac(static_cast<size_t>(f0.size()), std::vector<double>(static_cast<size_t>(x.size())));
  for (int64_t j = 0; j < x.size(); ++j) {
    Tensor xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const Tensor fp = f(xp), fm = f(xm);
    for (int64_t i = 0; i < f0.size(); ++i) jac[static_cast<size_t>(i)][static_cast<size_t>(j)] = (fp[i] - fm[i]) / (2 * h);
  }
  return jac;
}

double keys(double t) {
  const double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return (a + 2) * t * t * t - (a + 3) * t * t + 1;
  if (t < 2.0) return a * t * t * t - 5 * a * t * t + 8 * a * t - 4 * a;
  return 0.0;
}

Matrix shrink_taps(int in, int factor) {
  const int out = in / factor;
  Matrix m(static_cast<size_t>(out), std::vector<double>(static_cast<size_t>(in), 0.0));
  for (int o = 0; o < out; ++o) {
    // Output sample o sits at input coordinate (o + 0.5) * factor - 0.5.
    const double centre = (o + 0.5) * factor - 0.5;
    double total = 0.0;
    for (int k = -4 * factor; k <= 4 * factor; ++k) {
      const int tap = static_cast<int>(std::floor(centre)) + k;
      const double wgt = keys((centre - tap) / factor);
      if (wgt == 0.0) continue;
      const int src = std::clamp(tap, 0, in - 1);
      m[static_cast<size_t>(o)][static_cast<size_t>(src)] += wgt;
      total += wgt;
    }
    for (double& v : m[static_cast<size_t>(o)]) v /= total;
  }
  return m;
}

double naive_psnr(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = s / static_cast<double>(a.size());
  if (mse < 1e-10) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

GradCheck check_gradient(const std::function<ncsr::Var()>& loss, ncsr::Var& leaf, int probes, uint64_t seed, double h,
                         double floor) {
  leaf.zero_grad();
  ncsr::backward(loss());
  const Tensor analytic = leaf.grad();
  std::mt19937_64 gen(seed);
  const int64_t size = leaf.value().size();
  std::vector<int64_t> idx;
  if (probes <= 0 || probes >= size) {
    for (int64_t i = 0; i < size; ++i) idx.push_back(i);
  } else {
    std::uniform_int_distribution<int64_t> pick(0, size - 1);
    for (int k = 0; k < probes; ++k) idx.push_back(pick(gen));
  }
  GradCheck out;
  ncsr::NoGradGuard guard;
  for (int64_t i : idx) {
    double& slot = leaf.mutable_value()[i];
    const double orig = slot;
    slot = orig + h;
    const double lp = loss().value().item();
    slot = orig - h;
    const double lm = loss().value().item();
    slot = orig;
    const double numeric = (lp - lm) / (2 * h);
    const double a = analytic[i];
    out.worst_rel = std::max(out.worst_rel, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor}));
    ++out.probes;
  }
  return out;
}

Tensor random_tensor(Shape s, uint64_t seed, double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (double& v : t.values()) v = d(gen);
  return t;
}

}  // namespace oracle
