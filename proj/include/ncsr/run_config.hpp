#pragma once

#include <string>
#include <vector>

#include "ncsr/image_io.hpp"
#include "ncsr/metrics.hpp"
#include "ncsr/model.hpp"
#include "ncsr/trainer.hpp"

namespace ncsr {

struct EvalSettings {
  int n_samples = 10;
  double temperature = 0.9;
  PixelScore score = PixelScore::kSquared;
};

/// Everything a command reads from its config file. Keys are dotted:
/// model.*, train.*, eval.*, data.*, run.*.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  EvalSettings eval;
  /// "synth" for the generated corpus, otherwise a manifest path.
  std::string corpus = "synth";
  SyntheticCorpusSpec synth;
  std::string run_dir = "runs/ncsr";

  /// Every key with its current value; parses back to an equal config.
  std::string serialize() const;
  /// Unknown keys and bad values raise ConfigError with the line number.
  /// Model and train invariants are validated; warnings collect permissive
  /// noise-free-rule complaints.
  static RunConfig parse(const std::string& text, std::vector<std::string>* warnings = nullptr);
};

/// Seed stream that initialises the 1x1 weights of a run's model.
inline constexpr uint64_t kModelInitStream = 4;

}  // namespace ncsr
