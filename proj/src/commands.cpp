#include "ncsr/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "ncsr/checkpoint.hpp"
#include "ncsr/image_io.hpp"

#ifndef NCSR_BUILD_ID
#define NCSR_BUILD_ID "unknown"
#endif
#ifndef NCSR_VERSION
#define NCSR_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace ncsr {

const char* build_id() { return NCSR_BUILD_ID; }
const char* version_string() { return NCSR_VERSION; }

namespace {

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

}  // namespace

std::vector<Tensor> load_corpus(const RunConfig& rc) {
  std::vector<Tensor> out;
  if (rc.corpus == "synth") {
    for (ImageRecord& r : synth_corpus(rc.synth)) out.push_back(std::move(r.hr));
    return out;
  }
  if (!fs::exists(rc.corpus)) throw ConfigError("data.corpus: manifest '" + rc.corpus + "' does not exist");
  for (const ManifestEntry& e : read_manifest(rc.corpus)) out.push_back(load_png(e.hr_path));
  return out;
}

TrainOutcome cmd_train(const std::string& config_path, const LogFn& log) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  const std::string text = read_file(config_path);
  std::vector<std::string> warnings;
  const RunConfig rc = RunConfig::parse(text, &warnings);
  for (const std::string& w : warnings) say("warning: " + w);
  const std::vector<Tensor> corpus = load_corpus(rc);

  TrainOutcome out;
  out.run_dir = rc.run_dir;
  make_dir(rc.run_dir);
  write_file(join(rc.run_dir, "config.txt"), text);
  write_file(join(rc.run_dir, "config.resolved"), rc.serialize());

  Rng init = Rng(rc.train.seed).derive(kModelInitStream);
  auto model = NcsrModel::build(rc.model, init);

  std::string log_text = "step\tbits_per_dim\tlr\tgrad_norm\tseconds\n";
  std::string events;
  TrainHooks hooks;
  hooks.on_record = [&](const TrainRecord& r) {
    log_text += format_record(r) + "\n";
    if (r.step == 1 || r.step % 50 == 0 || r.step == rc.train.total_steps) say(format_record(r));
  };
  hooks.on_event = [&](const std::string& e) {
    events += e + "\n";
    say(e);
  };
  hooks.on_checkpoint = [&](int step, NcsrModel& m, const CheckpointMeta& meta) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%06d.ckpt", step);
    save_checkpoint(join(rc.run_dir, name), m, meta);
  };

  auto flush_logs = [&] {
    write_file(join(rc.run_dir, "train.log"), log_text);
    write_file(join(rc.run_dir, "events.log"), events);
  };
  try {
    out.result = train(*model, corpus, rc.train, hooks);
  } catch (...) {
    flush_logs();
    throw;
  }
  flush_logs();

  const std::string bytes = checkpoint_bytes(*model, out.result.meta);
  out.final_checkpoint = join(rc.run_dir, "final.ckpt");
  write_file(out.final_checkpoint, bytes);
  out.checkpoint_hash = content_hash(bytes);
  std::ostringstream run;
  run << "seed = " << rc.train.seed << "\n"
      << "build_id = " << build_id() << "\n"
      << "version = " << version_string() << "\n"
      << "steps = " << out.result.meta.step << "\n"
      << "final_checkpoint = final.ckpt\n"
      << "final_checkpoint_hash = " << out.checkpoint_hash << "\n";
  write_file(join(rc.run_dir, "run.txt"), run.str());
  say("final checkpoint " + out.final_checkpoint + " hash " + out.checkpoint_hash);
  return out;
}

SampleOutcome cmd_sample(const std::string& checkpoint, const std::string& lr_png, int n, double temperature,
                         uint64_t seed, const std::string& out_dir) {
  require(n >= 1, "sample: n must be >= 1");
  require(temperature >= 0.0, "sample: temperature must be >= 0");
  const std::string bytes = read_file(checkpoint);
  const LoadedCheckpoint ck = checkpoint_from_bytes(bytes);
  const Tensor lr = load_png(lr_png);
  const ModelConfig& mc = ck.model->config();
  const int64_t mult = int64_t{1} << mc.levels;
  if ((lr.shape().h * mc.scale) % mult != 0 || (lr.shape().w * mc.scale) % mult != 0) {
    throw ConfigError("LR image " + lr.shape().str() + " at checkpoint scale " + std::to_string(mc.scale) +
                      " does not give an HR size divisible by 2^levels = " + std::to_string(mult));
  }
  Rng rng(seed);
  const std::vector<Tensor> samples = ck.model->sample(lr, temperature, rng, n);

  make_dir(out_dir);
  SampleOutcome out;
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03d.png", i);
    out.images.push_back(join(out_dir, name));
    save_png(out.images.back(), samples[static_cast<size_t>(i)]);
  }
  std::ostringstream side;
  side << "checkpoint = " << checkpoint << "\n"
       << "checkpoint_hash = " << content_hash(bytes) << "\n"
       << "lr_image = " << lr_png << "\n"
       << "n = " << n << "\n"
       << "temperature = " << format_double(temperature) << "\n"
       << "seed = " << seed << "\n"
       << "build_id = " << build_id() << "\n";
  out.sidecar = join(out_dir, "sample.txt");
  write_file(out.sidecar, side.str());
  return out;
}

MetricsReport cmd_eval(const std::string& checkpoint, const std::string& manifest, int n, double temperature,
                       uint64_t seed, const std::string& out_dir, int threads) {
  const std::string bytes = read_file(checkpoint);
  const LoadedCheckpoint ck = checkpoint_from_bytes(bytes);
  const ModelConfig& mc = ck.model->config();
  const std::vector<ManifestEntry> entries = read_manifest(manifest);

  std::vector<EvalImage> images;
  std::vector<std::string> load_failures;
  for (const ManifestEntry& e : entries) {
    try {
      ImagePair p = make_pair(load_png(e.hr_path), mc.scale, mc.hr_multiple());
      images.push_back(EvalImage{e.id, std::move(p.hr), std::move(p.lr)});
    } catch (const std::exception& ex) {
      load_failures.push_back(e.id + ": " + ex.what());
    }
  }
  MetricsReport report = evaluate(*ck.model, images, n, temperature, seed, threads);
  report.failures.insert(report.failures.begin(), load_failures.begin(), load_failures.end());

  const std::string dir = out_dir.empty() ? join(fs::path(checkpoint).parent_path().string(), "eval") : out_dir;
  make_dir(dir);
  write_file(join(dir, "metrics.tsv"), report.tsv());
  write_file(join(dir, "metrics.txt"),
             "checkpoint_hash = " + content_hash(bytes) + "\nbuild_id = " + build_id() + "\n" + report.key_values());
  return report;
}

std::vector<ManifestEntry> cmd_synth_data(const std::string& config_path, const std::string& out_dir) {
  const RunConfig rc = RunConfig::parse(read_file(config_path));
  make_dir(out_dir);
  std::vector<ManifestEntry> entries;
  for (const ImageRecord& r : synth_corpus(rc.synth)) {
    save_png(join(out_dir, r.id + ".png"), r.hr);
    entries.push_back(ManifestEntry{r.id, r.id + ".png"});
  }
  write_manifest(join(out_dir, "manifest.tsv"), entries);
  return entries;
}

}  // namespace ncsr
