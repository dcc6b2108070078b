#include "ncsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace ncsr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'N', 'C', 'S', 'R'};
constexpr uint8_t kDtypeF64 = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(const char* what) {
    const uint32_t n = get<uint32_t>(what);
    need(n, what);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, b_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(size_t n, const char* what) {
    if (b_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }
  const std::string& b_;
  size_t pos_ = 0;
};

}  // namespace

std::string checkpoint_bytes(NcsrModel& model, const CheckpointMeta& meta) {
  std::string out(kMagic, 4);
  put<uint32_t>(out, kCheckpointVersion);
  put_str(out, model.config().serialize());
  put<uint64_t>(out, meta.step);
  for (uint64_t s : meta.rng_state) put<uint64_t>(out, s);
  put<uint8_t>(out, model.data_initialized() ? 1 : 0);
  const ParamList params = model.parameters();
  put<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const NamedParam& p : params) {
    const Tensor& t = p.var->value();
    put_str(out, p.name);
    put<uint8_t>(out, kDtypeF64);
    const Shape& s = t.shape();
    for (int64_t d : {s.n, s.c, s.h, s.w}) put<int64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data()), static_cast<size_t>(t.size()) * sizeof(double));
  }
  return out;
}

void save_checkpoint(const std::string& path, NcsrModel& model, const CheckpointMeta& meta) {
  write_file(path, checkpoint_bytes(model, meta));
}

LoadedCheckpoint checkpoint_from_bytes(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint: bad magic");
  const uint32_t version = r.get<uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const ModelConfig cfg = ModelConfig::parse(r.str("config"));

  LoadedCheckpoint out;
  out.meta.step = r.get<uint64_t>("step");
  for (uint64_t& s : out.meta.rng_state) s = r.get<uint64_t>("rng state");
  const uint8_t flags = r.get<uint8_t>("flags");

  Rng rng(0);
  out.model = NcsrModel::build(cfg, rng);
  out.model->set_data_initialized((flags & 1) != 0);

  std::map<std::string, Var*> by_name;
  for (const NamedParam& p : out.model->parameters()) by_name[p.name] = p.var;

  const uint32_t count = r.get<uint32_t>("tensor count");
  if (count != by_name.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(by_name.size()));
  }
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str("tensor name");
    if (r.get<uint8_t>("dtype") != kDtypeF64) throw FormatError("tensor " + name + ": unsupported dtype");
    Shape s;
    s.n = r.get<int64_t>("shape");
    s.c = r.get<int64_t>("shape");
    s.h = r.get<int64_t>("shape");
    s.w = r.get<int64_t>("shape");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("unexpected tensor " + name);
    Tensor& dst = it->second->mutable_value();
    if (!(dst.shape() == s)) {
      throw FormatError("tensor " + name + " has shape " + s.str() + ", model expects " + dst.shape().str());
    }
    r.raw(dst.data(), static_cast<size_t>(dst.size()) * sizeof(double), "tensor values");
    by_name.erase(it);
  }
  if (!r.done()) throw FormatError("trailing bytes after tensor table");
  return out;
}

LoadedCheckpoint load_checkpoint(const std::string& path) { return checkpoint_from_bytes(read_file(path)); }

std::string content_hash(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

}  // namespace ncsr
