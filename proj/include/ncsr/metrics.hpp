#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ncsr/model.hpp"

namespace ncsr {

/// n predictions for one LR input.
struct SampleSet {
  std::vector<Tensor> samples;
  Tensor ground_truth;
  Tensor lr_input;
  int scale = 1;
};

enum class PixelScore { kSquared, kAbsolute };

struct Diversity {
  double value = 0.0;  ///< percent
  double local_best = 0.0;
  double global_best = 0.0;
  /// Every sample matches the ground truth; value is defined as 0.
  bool degenerate = false;
};

/// 100 * (global_best - local_best) / global_best, where the per-pixel score
/// is the channel-averaged error against the ground truth. Needs n >= 2.
Diversity diversity_score(const SampleSet& ss, PixelScore score = PixelScore::kSquared);

inline constexpr double kPsnrCap = 99.0;

/// Peak 1.0; 99 dB when MSE < 1e-10.
double psnr(const Tensor& a, const Tensor& b);

struct LrPsnr {
  double mean = 0.0;
  double worst = 0.0;
  std::vector<double> per_sample;
};

/// PSNR of each bicubic-downsampled sample against the LR input.
LrPsnr lr_psnr(const SampleSet& ss);

/// Stand-in perceptual distance (not LPIPS): over three dyadic scales, mean
/// absolute RGB difference plus mean absolute difference of luminance
/// gradient magnitudes. Zero iff the images are equal; symmetric.
double perceptual_proxy(const Tensor& a, const Tensor& b);

struct EvalImage {
  std::string id;
  Tensor hr;  ///< (1, 3, H, W), H and W multiples of the model's HR multiple
  Tensor lr;
};

struct MetricsRow {
  std::string id;
  std::optional<double> diversity;  ///< empty when n < 2
  bool degenerate = false;
  double lr_psnr_mean = 0.0;
  double lr_psnr_worst = 0.0;
  double psnr_best = 0.0;
  double perceptual_proxy = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<std::string> failures;  ///< "id: message"
  int n_samples = 0;
  double temperature = 0.0;
  uint64_t seed = 0;

  std::optional<double> mean_diversity() const;
  double mean_lr_psnr() const;
  double mean_lr_psnr_worst() const;
  double mean_psnr_best() const;
  double mean_perceptual_proxy() const;

  /// `image  diversity  lr_psnr_mean  lr_psnr_worst  psnr_best  perceptual_proxy`
  std::string tsv() const;
  std::string key_values() const;
  /// `diversity=...  lr_psnr=...  lr_psnr_worst=...  proxy=...`
  std::string summary() const;
};

/// Metrics for one image from an already drawn sample set.
MetricsRow score_samples(const std::string& id, const SampleSet& ss, PixelScore score = PixelScore::kSquared);

/// Samples every image with its own stream (seed derived by image index), so
/// the report does not depend on `threads`. Failing images are listed and
/// skipped.
MetricsReport evaluate(const NcsrModel& model, const std::vector<EvalImage>& images, int n_samples,
                       double temperature, uint64_t seed, int threads = 1,
                       PixelScore score = PixelScore::kSquared);

/// NCSR_THREADS if set and positive, otherwise 1.
int env_threads();

}  // namespace ncsr
