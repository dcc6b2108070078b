#include "ncsr/kv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace ncsr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const KvEntry& e, const std::string& why) {
  throw ConfigError("line " + std::to_string(e.line) + ": " + e.key + ": " + why + " (got '" + e.value + "')");
}

template <typename T>
T parse_number(const KvEntry& e, const char* what) {
  T v{};
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) bad(e, std::string("expected ") + what);
  return v;
}

}  // namespace

std::vector<KvEntry> parse_kv(const std::string& text) {
  std::vector<KvEntry> out;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    KvEntry e{trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line};
    if (e.key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

int parse_int(const KvEntry& e) { return parse_number<int>(e, "an integer"); }
int64_t parse_i64(const KvEntry& e) { return parse_number<int64_t>(e, "an integer"); }
uint64_t parse_u64(const KvEntry& e) { return parse_number<uint64_t>(e, "an unsigned integer"); }

double parse_double(const KvEntry& e) {
  const double v = parse_number<double>(e, "a real number");
  if (!std::isfinite(v)) bad(e, "expected a finite real number");
  return v;
}

bool parse_bool(const KvEntry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  bad(e, "expected true or false");
}

std::vector<int> parse_int_list(const KvEntry& e) {
  std::vector<int> out;
  if (e.value.empty()) return out;
  std::istringstream is(e.value);
  std::string item;
  while (std::getline(is, item, ',')) {
    KvEntry sub{e.key, trim(item), e.line};
    out.push_back(parse_int(sub));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_int_list(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace ncsr
