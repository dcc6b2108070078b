#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "ncsr/ncsr.h"

namespace fs = std::filesystem;

namespace {

fs::path workdir() {
  const fs::path d = fs::temp_directory_path() / "ncsr_capi_tests";
  fs::create_directories(d);
  return d;
}

std::string tiny_config(const fs::path& run) {
  return "model.scale = 2\nmodel.levels = 2\nmodel.flow_steps = 1\nmodel.ncl_blocks = 1\n"
         "model.encoder_blocks = 1\nmodel.encoder_width = 8\nmodel.coupling_hidden = 8\n"
         "train.patch_hr = 16\ntrain.total_steps = 3\ntrain.checkpoint_every = 0\n"
         "data.synth.n_images = 3\ndata.synth.size = 16\nrun.dir = " +
         run.string() + "\n";
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

void collect(const char* line, void* user) { static_cast<std::string*>(user)->append(line).append("\n"); }

}  // namespace

TEST(CApi, IdentityStrings) {
  EXPECT_GT(std::strlen(ncsr_version()), 0u);
  EXPECT_GT(std::strlen(ncsr_build_id()), 0u);
  EXPECT_STREQ(ncsr_status_name(NCSR_OK), "ok");
  EXPECT_STREQ(ncsr_status_name(NCSR_ERR_CONFIG), "configuration error");
}

TEST(CApi, ErrorsAreReportedNotThrown) {
  ncsr_image* img = nullptr;
  EXPECT_EQ(ncsr_image_load_png((workdir() / "missing.png").c_str(), &img), NCSR_ERR_IO);
  EXPECT_EQ(img, nullptr);
  EXPECT_NE(std::string(ncsr_last_error()).find("missing.png"), std::string::npos);
  EXPECT_EQ(ncsr_image_load_png(nullptr, &img), NCSR_ERR_INVALID_ARGUMENT);
  ncsr_model* m = nullptr;
  EXPECT_NE(ncsr_model_load((workdir() / "missing.ckpt").c_str(), &m), NCSR_OK);
  const fs::path bad = workdir() / "bad.cfg";
  write(bad, "model.nonsense = 1\n");
  EXPECT_EQ(ncsr_train(bad.c_str(), nullptr, nullptr), NCSR_ERR_CONFIG);
  EXPECT_NE(std::string(ncsr_last_error()).find("line 1"), std::string::npos);
}

TEST(CApi, EndToEndThroughHandles) {
  const fs::path dir = workdir() / "e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  write(cfg, tiny_config(dir / "run"));

  size_t written = 0;
  ASSERT_EQ(ncsr_synth_data(cfg.c_str(), (dir / "data").c_str(), &written), NCSR_OK) << ncsr_last_error();
  EXPECT_EQ(written, 3u);

  std::string log;
  ASSERT_EQ(ncsr_train(cfg.c_str(), collect, &log), NCSR_OK) << ncsr_last_error();
  EXPECT_FALSE(log.empty());
  const fs::path ckpt = dir / "run" / "final.ckpt";
  ASSERT_TRUE(fs::exists(ckpt));

  char hash[17];
  ASSERT_EQ(ncsr_file_hash(ckpt.c_str(), hash), NCSR_OK);
  EXPECT_EQ(std::strlen(hash), 16u);

  ncsr_model* model = nullptr;
  ASSERT_EQ(ncsr_model_load(ckpt.c_str(), &model), NCSR_OK) << ncsr_last_error();
  int scale = 0;
  ASSERT_EQ(ncsr_model_scale(model, &scale), NCSR_OK);
  EXPECT_EQ(scale, 2);

  ncsr_image* hr = nullptr;
  ASSERT_EQ(ncsr_image_load_png((dir / "data" / "synth_000.png").c_str(), &hr), NCSR_OK) << ncsr_last_error();
  int64_t h = 0, w = 0;
  ASSERT_EQ(ncsr_image_size(hr, &h, &w), NCSR_OK);
  EXPECT_EQ(h, 16);
  EXPECT_EQ(w, 16);

  ncsr_image* out[2] = {nullptr, nullptr};
  ASSERT_EQ(ncsr_model_sample(model, hr, 0.0, 1, 2, out), NCSR_OK) << ncsr_last_error();
  ASSERT_EQ(ncsr_image_size(out[0], &h, &w), NCSR_OK);
  EXPECT_EQ(h, 32);
  ASSERT_EQ(ncsr_image_save_png(out[0], (dir / "sample.png").c_str()), NCSR_OK);
  for (ncsr_image* i : out) ncsr_image_free(i);
  ncsr_image_free(hr);
  ncsr_model_free(model);

  ncsr_report* report = nullptr;
  ASSERT_EQ(ncsr_eval(ckpt.c_str(), (dir / "data" / "manifest.tsv").c_str(), 2, 0.0, 1, (dir / "eval").c_str(), 1,
                      &report),
            NCSR_OK)
      << ncsr_last_error();
  EXPECT_EQ(ncsr_report_image_count(report), 3u);
  EXPECT_EQ(ncsr_report_failure_count(report), 0u);
  EXPECT_EQ(std::string(ncsr_report_summary(report)).rfind("diversity=0.000", 0), 0u);
  ncsr_report_free(report);
  EXPECT_TRUE(fs::exists(dir / "eval" / "metrics.tsv"));

  ASSERT_EQ(ncsr_sample(ckpt.c_str(), (dir / "data" / "synth_001.png").c_str(), 2, 0.9, 3, (dir / "s").c_str()),
            NCSR_OK)
      << ncsr_last_error();
  EXPECT_TRUE(fs::exists(dir / "s" / "sample.txt"));
}

TEST(CApi, VerifyQuickPassesAndFaultFails) {
  std::string log;
  int ok = -1;
  ASSERT_EQ(ncsr_verify(0, 1, 0, collect, &log, &ok), NCSR_OK);
  EXPECT_EQ(ok, 1) << log;
  ok = -1;
  ASSERT_EQ(ncsr_verify(0, 1, 1, nullptr, nullptr, &ok), NCSR_OK);
  EXPECT_EQ(ok, 0);
}
