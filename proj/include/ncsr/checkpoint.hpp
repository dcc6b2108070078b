#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ncsr/model.hpp"

namespace ncsr {

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::kFormat, what) {}
};

inline constexpr uint32_t kCheckpointVersion = 1;

/// Training position stored next to the parameters.
struct CheckpointMeta {
  uint64_t step = 0;
  std::array<uint64_t, 4> rng_state{};
};

/// Little-endian layout:
///   "NCSR" | u32 version | u32 len + config text | u64 step | 4 x u64 rng
///   | u8 flags (bit 0: actnorm initialised) | u32 tensor count
///   | per tensor: u32 len + name | u8 dtype (1 = f64) | 4 x i64 shape | raw values
std::string checkpoint_bytes(NcsrModel& model, const CheckpointMeta& meta);
void save_checkpoint(const std::string& path, NcsrModel& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  std::unique_ptr<NcsrModel> model;
  CheckpointMeta meta;
};

LoadedCheckpoint checkpoint_from_bytes(const std::string& bytes);
LoadedCheckpoint load_checkpoint(const std::string& path);

/// FNV-1a 64 of a byte string, as 16 hex digits.
std::string content_hash(const std::string& bytes);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace ncsr
