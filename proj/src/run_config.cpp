#include "ncsr/run_config.hpp"

#include <sstream>

namespace ncsr {

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << model.serialize() << train.serialize() << "eval.n_samples = " << eval.n_samples << "\n"
     << "eval.temperature = " << format_double(eval.temperature) << "\n"
     << "eval.score = " << (eval.score == PixelScore::kSquared ? "squared" : "absolute") << "\n"
     << "data.corpus = " << corpus << "\n"
     << "data.synth.n_images = " << synth.n_images << "\n"
     << "data.synth.size = " << synth.size << "\n"
     << "data.synth.seed = " << synth.seed << "\n"
     << "run.dir = " << run_dir << "\n";
  return os.str();
}

RunConfig RunConfig::parse(const std::string& text, std::vector<std::string>* warnings) {
  RunConfig rc;
  for (const KvEntry& e : parse_kv(text)) {
    if (rc.model.apply(e) || rc.train.apply(e)) continue;
    const std::string& k = e.key;
    if (k == "eval.n_samples") rc.eval.n_samples = parse_int(e);
    else if (k == "eval.temperature") rc.eval.temperature = parse_double(e);
    else if (k == "eval.score") {
      if (e.value == "squared") rc.eval.score = PixelScore::kSquared;
      else if (e.value == "absolute") rc.eval.score = PixelScore::kAbsolute;
      else throw ConfigError("line " + std::to_string(e.line) + ": eval.score must be squared or absolute");
    } else if (k == "data.corpus") rc.corpus = e.value;
    else if (k == "data.synth.n_images") rc.synth.n_images = parse_int(e);
    else if (k == "data.synth.size") rc.synth.size = parse_int(e);
    else if (k == "data.synth.seed") rc.synth.seed = parse_u64(e);
    else if (k == "run.dir") rc.run_dir = e.value;
    else throw ConfigError("line " + std::to_string(e.line) + ": unknown key " + k);
  }
  rc.model.validate(warnings);
  rc.train.validate(rc.model);
  if (rc.corpus.empty()) throw ConfigError("data.corpus must name a manifest or be 'synth'");
  if (rc.run_dir.empty()) throw ConfigError("run.dir must not be empty");
  if (rc.eval.n_samples < 1) throw ConfigError("eval.n_samples must be >= 1");
  if (!(rc.eval.temperature >= 0.0)) throw ConfigError("eval.temperature must be >= 0");
  if (rc.synth.n_images < 1 || rc.synth.size < 4) {
    throw ConfigError("data.synth.n_images must be >= 1 and data.synth.size >= 4");
  }
  return rc;
}

}  // namespace ncsr
