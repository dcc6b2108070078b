#pragma once

#include <string>
#include <vector>

#include "ncsr/tensor.hpp"

namespace ncsr {

/// 8-bit non-interlaced grey or RGB PNG -> (1, 3, H, W) holding byte/255.
/// Grey is replicated to three channels. Palette, alpha, 16-bit and
/// interlaced files are rejected.
Tensor load_png(const std::string& path);
/// Writes (1, 3, H, W) as 8-bit RGB, rounding clamp(v, 0, 1) * 255.
void save_png(const std::string& path, const Tensor& img);

struct ImagePair {
  Tensor hr;
  Tensor lr;
};

/// Centre-crops each side down to a multiple of `multiple` and derives the
/// LR image by bicubic downsampling.
ImagePair make_pair(const Tensor& hr, int scale, int multiple);

struct SyntheticCorpusSpec {
  int n_images = 16;
  int size = 64;
  uint64_t seed = 0;
};

struct ImageRecord {
  std::string id;
  std::string hr_path;  ///< empty for in-memory records
  Tensor hr;
};

/// Gradient fields, Gaussian blobs and stripe/checker textures, quantized to
/// the 1/255 grid. Pure function of the spec.
std::vector<ImageRecord> synth_corpus(const SyntheticCorpusSpec& spec);

struct ManifestEntry {
  std::string id;
  std::string hr_path;
};

/// `id<TAB>hr_path` per line; relative paths resolve against the manifest's
/// directory.
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

}  // namespace ncsr
