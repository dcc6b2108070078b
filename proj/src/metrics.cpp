#include "ncsr/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

#include "ncsr/resize.hpp"

namespace ncsr {

Diversity diversity_score(const SampleSet& ss, PixelScore score) {
  require(ss.samples.size() >= 2, "diversity needs at least 2 samples");
  const Tensor& gt = ss.ground_truth;
  for (const Tensor& s : ss.samples) check_same_shape(s, gt, "diversity: sample vs ground truth");
  const Shape& sh = gt.shape();
  const int64_t pixels = sh.n * sh.h * sh.w;

  std::vector<double> pixel_min(static_cast<size_t>(pixels), INFINITY);
  double global_best = INFINITY;
  for (const Tensor& s : ss.samples) {
    double total = 0.0;
    int64_t p = 0;
    for (int64_t n = 0; n < sh.n; ++n) {
      for (int64_t i = 0; i < sh.h; ++i) {
        for (int64_t j = 0; j < sh.w; ++j, ++p) {
          double e = 0.0;
          for (int64_t c = 0; c < sh.c; ++c) {
            const double d = s.at(n, c, i, j) - gt.at(n, c, i, j);
            e += score == PixelScore::kSquared ? d * d : std::abs(d);
          }
          e /= static_cast<double>(sh.c);
          total += e;
          pixel_min[static_cast<size_t>(p)] = std::min(pixel_min[static_cast<size_t>(p)], e);
        }
      }
    }
    global_best = std::min(global_best, total / static_cast<double>(pixels));
  }
  Diversity d;
  d.global_best = global_best;
  d.local_best = std::accumulate(pixel_min.begin(), pixel_min.end(), 0.0) / static_cast<double>(pixels);
  if (global_best <= 0.0) {
    d.degenerate = true;
    return d;
  }
  // min of means >= mean of mins; allow only summation rounding.
  if (d.local_best > global_best * (1.0 + 1e-12)) {
    throw NumericError("diversity", "local best exceeds global best");
  }
  d.value = (global_best - d.local_best) / global_best * 100.0;
  return d;
}

double psnr(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "psnr");
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  const double mse = s / static_cast<double>(a.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

LrPsnr lr_psnr(const SampleSet& ss) {
  require(!ss.samples.empty(), "lr_psnr needs at least one sample");
  LrPsnr out;
  for (const Tensor& s : ss.samples) {
    const Tensor down = bicubic_resize(s, 1, ss.scale);
    check_same_shape(down, ss.lr_input, "lr_psnr: downsampled sample vs LR input");
    out.per_sample.push_back(psnr(down, ss.lr_input));
  }
  out.mean = std::accumulate(out.per_sample.begin(), out.per_sample.end(), 0.0) /
             static_cast<double>(out.per_sample.size());
  out.worst = *std::min_element(out.per_sample.begin(), out.per_sample.end());
  return out;
}

namespace {

Tensor gradient_magnitude(const Tensor& x) {
  const Shape& s = x.shape();
  Tensor g(Shape{s.n, 1, s.h, s.w});
  auto lum = [&](int64_t n, int64_t i, int64_t j) {
    i = std::clamp<int64_t>(i, 0, s.h - 1);
    j = std::clamp<int64_t>(j, 0, s.w - 1);
    return 0.299 * x.at(n, 0, i, j) + 0.587 * x.at(n, 1, i, j) + 0.114 * x.at(n, 2, i, j);
  };
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t i = 0; i < s.h; ++i)
      for (int64_t j = 0; j < s.w; ++j) {
        const double gx = 0.5 * (lum(n, i, j + 1) - lum(n, i, j - 1));
        const double gy = 0.5 * (lum(n, i + 1, j) - lum(n, i - 1, j));
        g.at(n, 0, i, j) = std::sqrt(gx * gx + gy * gy);
      }
  return g;
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

double perceptual_proxy(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "perceptual_proxy");
  require(a.shape().c == 3, "perceptual_proxy expects RGB input");
  Tensor pa = a, pb = b;
  double total = 0.0;
  int scales = 0;
  for (int k = 0; k < 3; ++k) {
    total += mean_abs_diff(pa, pb) + mean_abs_diff(gradient_magnitude(pa), gradient_magnitude(pb));
    ++scales;
    const Shape& s = pa.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0 || s.h < 4 || s.w < 4) break;
    pa = area_downsample(pa, 2);
    pb = area_downsample(pb, 2);
  }
  return total / scales;
}

MetricsRow score_samples(const std::string& id, const SampleSet& ss, PixelScore score) {
  MetricsRow row;
  row.id = id;
  if (ss.samples.size() >= 2) {
    const Diversity d = diversity_score(ss, score);
    row.diversity = d.value;
    row.degenerate = d.degenerate;
  }
  const LrPsnr lp = lr_psnr(ss);
  row.lr_psnr_mean = lp.mean;
  row.lr_psnr_worst = lp.worst;
  row.psnr_best = -INFINITY;
  double proxy = 0.0;
  for (const Tensor& s : ss.samples) {
    row.psnr_best = std::max(row.psnr_best, psnr(s, ss.ground_truth));
    proxy += perceptual_proxy(s, ss.ground_truth);
  }
  row.perceptual_proxy = proxy / static_cast<double>(ss.samples.size());
  return row;
}

namespace {

template <typename F>
double row_mean(const std::vector<MetricsRow>& rows, F f) {
  if (rows.empty()) return std::nan("");
  double s = 0.0;
  for (const MetricsRow& r : rows) s += f(r);
  return s / static_cast<double>(rows.size());
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::optional<double> MetricsReport::mean_diversity() const {
  if (rows.empty() || !rows.front().diversity) return std::nullopt;
  return row_mean(rows, [](const MetricsRow& r) { return *r.diversity; });
}
double MetricsReport::mean_lr_psnr() const {
  return row_mean(rows, [](const MetricsRow& r) { return r.lr_psnr_mean; });
}
double MetricsReport::mean_lr_psnr_worst() const {
  return row_mean(rows, [](const MetricsRow& r) { return r.lr_psnr_worst; });
}
double MetricsReport::mean_psnr_best() const {
  return row_mean(rows, [](const MetricsRow& r) { return r.psnr_best; });
}
double MetricsReport::mean_perceptual_proxy() const {
  return row_mean(rows, [](const MetricsRow& r) { return r.perceptual_proxy; });
}

std::string MetricsReport::tsv() const {
  std::ostringstream os;
  os << "image\tdiversity\tlr_psnr_mean\tlr_psnr_worst\tpsnr_best\tperceptual_proxy\n";
  for (const MetricsRow& r : rows) {
    os << r.id << '\t' << (r.diversity ? fmt(*r.diversity) : "undefined") << '\t' << fmt(r.lr_psnr_mean) << '\t'
       << fmt(r.lr_psnr_worst) << '\t' << fmt(r.psnr_best) << '\t' << fmt(r.perceptual_proxy) << '\n';
  }
  return os.str();
}

std::string MetricsReport::key_values() const {
  std::ostringstream os;
  const auto div = mean_diversity();
  os << "n_samples = " << n_samples << "\n"
     << "temperature = " << format_double(temperature) << "\n"
     << "seed = " << seed << "\n"
     << "images = " << rows.size() << "\n"
     << "failures = " << failures.size() << "\n"
     << "mean.diversity = " << (div ? fmt(*div) : "undefined") << "\n"
     << "mean.lr_psnr_mean = " << fmt(mean_lr_psnr()) << "\n"
     << "mean.lr_psnr_worst = " << fmt(mean_lr_psnr_worst()) << "\n"
     << "mean.psnr_best = " << fmt(mean_psnr_best()) << "\n"
     << "mean.perceptual_proxy = " << fmt(mean_perceptual_proxy()) << "\n";
  for (const MetricsRow& r : rows) {
    const std::string p = "image." + r.id + ".";
    os << p << "diversity = " << (r.diversity ? fmt(*r.diversity) : "undefined") << "\n";
    if (r.degenerate) os << p << "degenerate = true\n";
    os << p << "lr_psnr_mean = " << fmt(r.lr_psnr_mean) << "\n"
       << p << "lr_psnr_worst = " << fmt(r.lr_psnr_worst) << "\n"
       << p << "psnr_best = " << fmt(r.psnr_best) << "\n"
       << p << "perceptual_proxy = " << fmt(r.perceptual_proxy) << "\n";
  }
  for (size_t i = 0; i < failures.size(); ++i) os << "failure." << i << " = " << failures[i] << "\n";
  return os.str();
}

std::string MetricsReport::summary() const {
  const auto div = mean_diversity();
  return "diversity=" + (div ? fmt(*div, "%.3f") : std::string("undefined")) +
         "  lr_psnr=" + fmt(mean_lr_psnr(), "%.3f") + "  lr_psnr_worst=" + fmt(mean_lr_psnr_worst(), "%.3f") +
         "  proxy=" + fmt(mean_perceptual_proxy(), "%.4f");
}

MetricsReport evaluate(const NcsrModel& model, const std::vector<EvalImage>& images, int n_samples, double temperature,
                       uint64_t seed, int threads, PixelScore score) {
  require(n_samples >= 1, "evaluate needs n_samples >= 1");
  require(temperature >= 0.0, "temperature must be >= 0");
  MetricsReport report;
  report.n_samples = n_samples;
  report.temperature = temperature;
  report.seed = seed;

  const Rng root(seed);
  std::vector<std::optional<MetricsRow>> rows(images.size());
  std::vector<std::string> errors(images.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < images.size(); i = next++) {
      try {
        Rng rng = root.derive(i);
        SampleSet ss;
        ss.samples = model.sample(images[i].lr, temperature, rng, n_samples);
        ss.ground_truth = images[i].hr;
        ss.lr_input = images[i].lr;
        ss.scale = model.config().scale;
        rows[i] = score_samples(images[i].id, ss, score);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(images.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (size_t i = 0; i < images.size(); ++i) {
    if (rows[i]) report.rows.push_back(*rows[i]);
    else report.failures.push_back(images[i].id + ": " + errors[i]);
  }
  return report;
}

int env_threads() {
  const char* s = std::getenv("NCSR_THREADS");
  if (!s) return 1;
  const int v = std::atoi(s);
  return v > 0 ? v : 1;
}

}  // namespace ncsr
