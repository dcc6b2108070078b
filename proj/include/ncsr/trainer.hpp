#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ncsr/checkpoint.hpp"
#include "ncsr/model.hpp"
#include "ncsr/noise.hpp"

namespace ncsr {

class TrainingAborted : public Error {
 public:
  explicit TrainingAborted(const std::string& what) : Error(ErrorKind::kTrainingAborted, what) {}
};

struct TrainConfig {
  int batch_size = 4;
  int patch_hr = 64;
  double lr_init = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  std::vector<int> halve_at{1100, 1650};
  int total_steps = 2000;
  double grad_clip_norm = 10.0;
  uint64_t seed = 0;
  /// Add v to the HR target / w to the LR input. Both on is the matched
  /// protocol; HR only is the misconditioned stage.
  bool hr_noise = true;
  bool lr_noise = true;
  bool dequantize = true;
  /// 0 disables intermediate checkpoints.
  int checkpoint_every = 500;

  void validate(const ModelConfig& model) const;
  std::string serialize() const;
  /// Applies one `train.*` entry; returns false for other keys.
  bool apply(const KvEntry& e);
};

/// Learning rate at a 1-based step: lr_init halved once per milestone
/// already reached.
double learning_rate(const TrainConfig& tc, int step);

struct TrainRecord {
  int step = 0;
  double bits_per_dim = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
};

/// `step  bits_per_dim  lr  grad_norm  seconds`, tab separated.
std::string format_record(const TrainRecord& r);

struct Batch {
  Tensor x;  ///< (B, 3, p, p)
  Tensor y;  ///< (B, 3, p/s, p/s)
};

/// Random crops with a random 90 degree rotation and horizontal flip; LR is
/// the bicubic downsample of the augmented HR patch. Images smaller than the
/// patch are skipped with a warning.
Batch make_batch(const std::vector<Tensor>& corpus, Rng& rng, int batch_size, int patch, int scale,
                 std::vector<std::string>* warnings = nullptr);

/// Adam with bias correction.
class Adam {
 public:
  Adam(ParamList params, double beta1, double beta2, double epsilon);
  /// Applies one update from the parameters' current gradients.
  void step(double lr);
  /// Multiplies every gradient by `factor`.
  void scale_grads(double factor);
  double grad_norm() const;
  bool grads_finite() const;
  void zero_grad();
  int64_t steps_taken() const { return t_; }

 private:
  ParamList params_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

struct TrainHooks {
  std::function<void(const TrainRecord&)> on_record;
  std::function<void(const std::string&)> on_event;
  std::function<void(int step, NcsrModel& model, const CheckpointMeta& meta)> on_checkpoint;
};

struct TrainResult {
  std::vector<TrainRecord> records;
  std::vector<std::string> events;
  CheckpointMeta meta;
};

/// Full NLL training loop: batch, dequantize, draw and add noise, nll,
/// backward, clip, Adam. Throws TrainingAborted after two consecutive
/// non-finite losses.
TrainResult train(NcsrModel& model, const std::vector<Tensor>& corpus, const TrainConfig& tc,
                  const TrainHooks& hooks = {});

}  // namespace ncsr
