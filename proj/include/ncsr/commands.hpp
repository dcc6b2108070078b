#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ncsr/metrics.hpp"
#include "ncsr/run_config.hpp"
#include "ncsr/trainer.hpp"

namespace ncsr {

using LogFn = std::function<void(const std::string&)>;

/// git-describe style identifier baked in at configure time.
const char* build_id();
const char* version_string();

struct TrainOutcome {
  std::string run_dir;
  std::string final_checkpoint;
  std::string checkpoint_hash;
  TrainResult result;
};

/// Loads the training images named by `data.corpus`: the synthetic corpus or
/// every manifest entry.
std::vector<Tensor> load_corpus(const RunConfig& rc);

/// Run directory layout: config.txt (verbatim input), config.resolved (every
/// key), run.txt (seed, build id, checkpoint hash), train.log, events.log,
/// step_<k>.ckpt and final.ckpt.
TrainOutcome cmd_train(const std::string& config_path, const LogFn& log = {});

struct SampleOutcome {
  std::vector<std::string> images;
  std::string sidecar;
};

/// Writes sample_<i>.png and sample.txt (temperature, seed, checkpoint hash).
SampleOutcome cmd_sample(const std::string& checkpoint, const std::string& lr_png, int n, double temperature,
                         uint64_t seed, const std::string& out_dir);

/// Writes metrics.tsv and metrics.txt into `out_dir` (default: an `eval`
/// directory next to the checkpoint).
MetricsReport cmd_eval(const std::string& checkpoint, const std::string& manifest, int n, double temperature,
                       uint64_t seed, const std::string& out_dir = {}, int threads = 1);

/// Writes <id>.png for every synthetic image plus manifest.tsv.
std::vector<ManifestEntry> cmd_synth_data(const std::string& config_path, const std::string& out_dir);

}  // namespace ncsr
