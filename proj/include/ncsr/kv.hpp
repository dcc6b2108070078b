#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ncsr/error.hpp"

namespace ncsr {

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

/// Flat `key = value` text. `#` starts a comment; blank lines are skipped.
struct KvEntry {
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<KvEntry> parse_kv(const std::string& text);

/// Typed field parsing; errors name the key and line.
int parse_int(const KvEntry& e);
int64_t parse_i64(const KvEntry& e);
uint64_t parse_u64(const KvEntry& e);
double parse_double(const KvEntry& e);
bool parse_bool(const KvEntry& e);
std::vector<int> parse_int_list(const KvEntry& e);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);
std::string format_int_list(const std::vector<int>& v);

}  // namespace ncsr
