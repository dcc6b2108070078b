#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "ncsr/ncsr.h"

namespace {

void print_line(const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

int report_error(const char* command, ncsr_status s) {
  std::fprintf(stderr, "ncsr %s: %s: %s\n", command, ncsr_status_name(s), ncsr_last_error());
  switch (s) {
    case NCSR_ERR_CONFIG: return 2;
    case NCSR_ERR_TRAINING_ABORTED: return 3;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-based stochastic super-resolution"};
  app.set_version_flag("--version", std::string(ncsr_version()) + " (" + ncsr_build_id() + ")");
  app.require_subcommand(1);

  std::string config, checkpoint, image, out_dir, manifest, level = "quick";
  int n = 10;
  double temperature = 0.9;
  uint64_t seed = 0;
  bool inject_fault = false;

  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("-c,--config", config, "Run config file")->required();

  auto* sample = app.add_subcommand("sample", "Draw super-resolved samples for one LR image");
  sample->add_option("-k,--checkpoint", checkpoint, "Checkpoint file")->required();
  sample->add_option("-i,--input", image, "LR PNG")->required();
  sample->add_option("-n,--num", n, "Number of samples")->check(CLI::PositiveNumber);
  sample->add_option("-t,--temperature", temperature, "Latent temperature")->check(CLI::NonNegativeNumber);
  sample->add_option("-s,--seed", seed, "Seed");
  sample->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest of HR images");
  eval->add_option("-k,--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("-m,--manifest", manifest, "Manifest (id<TAB>hr_path per line)")->required();
  eval->add_option("-n,--num", n, "Samples per image")->check(CLI::PositiveNumber);
  eval->add_option("-t,--temperature", temperature, "Latent temperature")->check(CLI::NonNegativeNumber);
  eval->add_option("-s,--seed", seed, "Seed");
  eval->add_option("-o,--out", out_dir, "Report directory (default: eval/ next to the checkpoint)");

  auto* verify = app.add_subcommand("verify", "Run the invariant suites");
  verify->add_option("--level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  verify->add_option("-s,--seed", seed, "Seed");
  verify->add_flag("--inject-fault", inject_fault, "Make a 1x1 weight singular before the checks");

  auto* synth = app.add_subcommand("synth-data", "Write the synthetic corpus as PNGs plus a manifest");
  synth->add_option("-c,--config", config, "Run config file")->required();
  synth->add_option("-o,--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*train) {
    const ncsr_status s = ncsr_train(config.c_str(), print_line, nullptr);
    return s == NCSR_OK ? 0 : report_error("train", s);
  }
  if (*sample) {
    const ncsr_status s = ncsr_sample(checkpoint.c_str(), image.c_str(), n, temperature, seed, out_dir.c_str());
    if (s != NCSR_OK) {
      // Shape problems with the input image are usage errors here.
      return report_error("sample", s == NCSR_ERR_SHAPE ? NCSR_ERR_CONFIG : s);
    }
    std::printf("wrote %d samples to %s\n", n, out_dir.c_str());
    return 0;
  }
  if (*eval) {
    ncsr_report* report = nullptr;
    const ncsr_status s = ncsr_eval(checkpoint.c_str(), manifest.c_str(), n, temperature, seed,
                                    out_dir.empty() ? nullptr : out_dir.c_str(), 0, &report);
    if (s != NCSR_OK) return report_error("eval", s);
    for (size_t i = 0; i < ncsr_report_failure_count(report); ++i) {
      std::fprintf(stderr, "failed: %s\n", ncsr_report_failure(report, i));
    }
    std::printf("%s\n", ncsr_report_summary(report));
    const bool all_failed = ncsr_report_image_count(report) == 0;
    ncsr_report_free(report);
    return all_failed ? 1 : 0;
  }
  if (*verify) {
    int all_passed = 0;
    const ncsr_status s = ncsr_verify(level == "full", seed, inject_fault, print_line, nullptr, &all_passed);
    if (s != NCSR_OK) return report_error("verify", s);
    std::printf("%s\n", all_passed ? "all properties passed" : "some properties FAILED");
    return all_passed ? 0 : 1;
  }
  if (*synth) {
    size_t written = 0;
    const ncsr_status s = ncsr_synth_data(config.c_str(), out_dir.c_str(), &written);
    if (s != NCSR_OK) return report_error("synth-data", s);
    std::printf("wrote %zu images and manifest.tsv to %s\n", written, out_dir.c_str());
    return 0;
  }
  return 2;
}
