#include <gtest/gtest.h>

#include "ncsr/kv.hpp"
#include "ncsr/run_config.hpp"

using namespace ncsr;

TEST(KvParse, CommentsBlanksAndLineNumbers) {
  const auto e = parse_kv("# header\n\nmodel.levels = 3   # trailing\n  train.seed=7\n");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].key, "model.levels");
  EXPECT_EQ(e[0].value, "3");
  EXPECT_EQ(e[0].line, 3);
  EXPECT_EQ(e[1].key, "train.seed");
  EXPECT_EQ(e[1].value, "7");
  EXPECT_EQ(e[1].line, 4);
}

TEST(KvParse, MalformedLineNamesLine) {
  try {
    parse_kv("a = 1\nno equals sign\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(KvParse, TypedValues) {
  EXPECT_EQ(parse_int({"k", "-4", 1}), -4);
  EXPECT_EQ(parse_double({"k", "2.5e-3", 1}), 2.5e-3);
  EXPECT_TRUE(parse_bool({"k", "true", 1}));
  EXPECT_FALSE(parse_bool({"k", "false", 1}));
  EXPECT_EQ(parse_int_list({"k", "1, 2,3", 1}), (std::vector<int>{1, 2, 3}));
  EXPECT_TRUE(parse_int_list({"k", "", 1}).empty());
  EXPECT_THROW(parse_int({"k", "3x", 1}), ConfigError);
  EXPECT_THROW(parse_bool({"k", "yes please", 1}), ConfigError);
  EXPECT_THROW(parse_double({"k", "", 1}), ConfigError);
}

TEST(KvFormat, DoublesRoundTrip) {
  for (double v : {0.1, 2e-4, 1.0 / 3.0, 123456.789, 0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(RunConfigTest, DefaultsMatchDeskScale) {
  const RunConfig rc = RunConfig::parse("");
  EXPECT_EQ(rc.model.scale, 4);
  EXPECT_EQ(rc.model.levels, 3);
  EXPECT_EQ(rc.model.flow_steps, 4);
  EXPECT_EQ(rc.model.ncl_blocks, (std::vector<int>{1, 2}));
  EXPECT_EQ(rc.model.noise_M, 0.1);
  EXPECT_EQ(rc.train.batch_size, 4);
  EXPECT_EQ(rc.train.patch_hr, 64);
  EXPECT_EQ(rc.train.lr_init, 2e-4);
  EXPECT_EQ(rc.train.beta1, 0.9);
  EXPECT_EQ(rc.train.beta2, 0.99);
  EXPECT_EQ(rc.train.epsilon, 1e-8);
  EXPECT_EQ(rc.train.halve_at, (std::vector<int>{1100, 1650}));
  EXPECT_EQ(rc.train.total_steps, 2000);
  EXPECT_EQ(rc.eval.n_samples, 10);
  EXPECT_EQ(rc.eval.temperature, 0.9);
  EXPECT_EQ(rc.corpus, "synth");
}

TEST(RunConfigTest, SerializeReparsesIdentically) {
  const std::string text =
      "model.scale = 2\nmodel.levels = 2\nmodel.ncl_blocks = 1\nmodel.conditioning = std\n"
      "train.patch_hr = 32\ntrain.seed = 11\ntrain.lr_noise = false\neval.score = absolute\n"
      "data.corpus = data/manifest.tsv\nrun.dir = /tmp/x\n";
  const RunConfig a = RunConfig::parse(text);
  const RunConfig b = RunConfig::parse(a.serialize());
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_EQ(b.model.conditioning, ConditioningVariant::kStd);
  EXPECT_FALSE(b.train.lr_noise);
  EXPECT_EQ(b.eval.score, PixelScore::kAbsolute);
  EXPECT_EQ(b.corpus, "data/manifest.tsv");
}

TEST(RunConfigTest, UnknownKeyRejectedWithLine) {
  try {
    RunConfig::parse("model.levels = 3\nmodel.levles = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos);
    EXPECT_NE(msg.find("model.levles"), std::string::npos);
  }
}

TEST(RunConfigTest, InvariantsChecked) {
  EXPECT_THROW(RunConfig::parse("train.patch_hr = 48\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("model.scale = 3\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("model.ncl_blocks = 1, 3\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("train.halve_at = 10, 5\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("eval.n_samples = 0\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("model.noise_M = -1\n"), ConfigError);
}

TEST(RunConfigTest, PermissiveNoiseFreeRuleWarns) {
  std::vector<std::string> warnings;
  const RunConfig rc = RunConfig::parse("model.ncl_blocks = 1, 2, 3\nmodel.strict_noise_free = false\n", &warnings);
  EXPECT_EQ(rc.model.ncl_blocks.size(), 3u);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(RunConfigTest, VariantNames) {
  for (auto v : {ConditioningVariant::kNoise, ConditioningVariant::kStd, ConditioningVariant::kNone})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("loud"), ConfigError);
}
