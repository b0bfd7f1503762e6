// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "binsed/cli.hpp"
#include "test_util.hpp"

using namespace binsed;

namespace {

/// Small corpus shared by the CLI tests: 6 recordings x 4 s, 3 folds.
struct CliFixture {
  TempDir dir{"cli"};
  std::filesystem::path corpus;
  std::filesystem::path work;

  CliFixture() {
    corpus = dir.file("corpus");
    work = dir.file("work");
    SynthSpec spec;
    spec.recordings = 6;
    spec.duration = 4.0;
    spec.folds = 3;
    spec.mean_gap = 1.0;
    spec.event_min = 0.4;
    spec.event_max = 1.2;
    spec.seed = 99;
    generate_corpus(spec, corpus);
  }

  std::vector<std::string> args(const std::string& cmd,
                                std::initializer_list<std::string> extra) const {
    std::vector<std::string> a{cmd, "--data", corpus.string(), "--out", work.string(),
                               "--threads", "2"};
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  }
};

}  // namespace

TEST_CASE("config file parsing") {
  TempDir dir("cfg");

  SUBCASE("keys, comments and whitespace") {
    write_text(dir.file("c.cfg"),
               "# comment line\n"
               "features = mel, tdoa\n"
               "epochs = 7   # trailing comment\n"
               "learning_rate = 0.002\n"
               "\n");
    const auto kv = parse_config_file(dir.file("c.cfg"));
    ExperimentConfig cfg;
    for (const auto& [k, v] : kv) apply_config_entry(cfg, k, v);
    CHECK(cfg.features == std::vector<std::string>{"mel", "tdoa"});
    CHECK(cfg.train.max_epochs == 7);
    CHECK(cfg.train.learning_rate == doctest::Approx(0.002));
  }

  SUBCASE("unknown keys are rejected, not silently ignored") {
    ExperimentConfig cfg;
    CHECK_THROWS_AS(apply_config_entry(cfg, "learnig_rate", "0.1"), ValidationError);
  }

  SUBCASE("malformed lines name their line number") {
    write_text(dir.file("bad.cfg"), "features = mel\nthis line has no equals\n");
    try {
      parse_config_file(dir.file("bad.cfg"));
      FAIL("expected format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }

  SUBCASE("synth class specs") {
    ExperimentConfig cfg;
    apply_config_entry(cfg, "synth_classes", "beep:300-900:8;buzz:1500-4000:-8");
    REQUIRE(cfg.synth.classes.size() == 2);
    CHECK(cfg.synth.classes[0].label == "beep");
    CHECK(cfg.synth.classes[0].delay == 8);
    CHECK(cfg.synth.classes[1].f_high == 4000.0);
    CHECK(cfg.synth.classes[1].delay == -8);
  }
}

TEST_CASE("feature list canonicalization") {
  ExperimentConfig cfg;

  SUBCASE("aliases resolve and order is canonical") {
    cfg.features = {"tdoa", "mel-monaural", "mel"};
    canonicalize_features(cfg);
    CHECK(cfg.features == std::vector<std::string>{"mel", "mel-mono", "tdoa"});
  }

  SUBCASE("mel-concat selects concat layering") {
    cfg.features = {"mel-concat"};
    canonicalize_features(cfg);
    CHECK(cfg.features == std::vector<std::string>{"mel"});
    CHECK(cfg.layering == LayeringMode::concat);
  }

  SUBCASE("unknown names are rejected") {
    cfg.features = {"cepstrum"};
    CHECK_THROWS_AS(canonicalize_features(cfg), ValidationError);
  }
}

TEST_CASE("synth determinism: identical seeds give byte-identical corpora") {
  TempDir dir("synthdet");
  SynthSpec spec;
  spec.recordings = 2;
  spec.duration = 2.0;
  spec.seed = 31;
  generate_corpus(spec, dir.file("a"));
  generate_corpus(spec, dir.file("b"));
  for (const auto& name : {"manifest.tsv", "audio/rec000.wav", "audio/rec001.wav",
                           "ann/rec000.txt", "ann/rec001.txt"}) {
    CHECK(read_text(dir.file("a") / name) == read_text(dir.file("b") / name));
  }
}

TEST_CASE("synth with zero density emits silent recordings and empty annotations") {
  TempDir dir("synthsilent");
  SynthSpec spec;
  spec.recordings = 2;
  spec.duration = 1.0;
  spec.density = 0.0;
  spec.noise_level = 0.0;
  generate_corpus(spec, dir.file("c"));
  CHECK(parse_annotations(dir.file("c") / "ann/rec000.txt").empty());
  const auto clip = read_wav(dir.file("c") / "audio/rec000.wav");
  for (const auto& ch : clip.samples) {
    for (float s : ch) CHECK(s == 0.0f);
  }
}

TEST_CASE("extract is idempotent and counts the feature-recording product") {
  CliFixture fx;
  CHECK(run_cli(fx.args("extract", {"--features", "mel,tdoa"})) == 0);
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(fx.work / "features")) {
    (void)e;
    ++files;
  }
  CHECK(files == 12);  // 6 recordings x 2 features

  SUBCASE("a second run rewrites nothing") {
    std::filesystem::file_time_type before =
        std::filesystem::last_write_time(fx.work / "features" / "audio_rec000.mel.fv");
    CHECK(run_cli(fx.args("extract", {"--features", "mel,tdoa"})) == 0);
    CHECK(std::filesystem::last_write_time(fx.work / "features" / "audio_rec000.mel.fv") ==
          before);
  }

  SUBCASE("--force rewrites") {
    std::filesystem::file_time_type before =
        std::filesystem::last_write_time(fx.work / "features" / "audio_rec000.mel.fv");
    CHECK(run_cli(fx.args("extract", {"--features", "mel", "--force"})) == 0);
    CHECK(std::filesystem::last_write_time(fx.work / "features" / "audio_rec000.mel.fv") >
          before);
  }
}

TEST_CASE("extract propagates channel-count errors for spatial features on mono audio") {
  CliFixture fx;
  // Overwrite one recording with a mono file.
  auto clip = read_wav(fx.corpus / "audio/rec000.wav");
  clip.samples.resize(1);
  write_wav(fx.corpus / "audio/rec000.wav", clip);
  CHECK(run_cli(fx.args("extract", {"--features", "tdoa"})) == 1);
}

TEST_CASE("train before extract gives an actionable error") {
  CliFixture fx;
  CHECK(run_cli(fx.args("train", {"--features", "mel", "--folds", "1"})) == 1);
}

TEST_CASE("cli end-to-end train, evaluate, predict on a small corpus") {
  CliFixture fx;
  write_text(fx.dir.file("t.cfg"),
             "conv_filters = 8\nlstm_units = 8\nepochs = 2\nbatch_size = 8\ndropout = 0.1\n");
  REQUIRE(run_cli(fx.args("extract", {"--features", "mel"})) == 0);
  REQUIRE(run_cli(fx.args("train", {"--features", "mel", "--folds", "1", "--seed", "4",
                                    "--config", fx.dir.file("t.cfg").string()})) == 0);
  CHECK(std::filesystem::exists(fx.work / "runs/mel.volume/fold1/model.ckpt"));
  CHECK(std::filesystem::exists(fx.work / "runs/mel.volume/fold1/history.txt"));

  REQUIRE(run_cli(fx.args("evaluate", {"--features", "mel", "--folds", "1", "--config",
                                       fx.dir.file("t.cfg").string()})) == 0);
  CHECK(std::filesystem::exists(fx.work / "runs/mel.volume/report.txt"));
  const auto kv = read_text(fx.work / "runs/mel.volume/report.kv");
  CHECK(kv.find("overall.F=") != std::string::npos);

  REQUIRE(run_cli(fx.args("predict", {"--features", "mel", "--folds", "1", "--config",
                                      fx.dir.file("t.cfg").string()})) == 0);
  int predictions = 0;
  for (const auto& e :
       std::filesystem::directory_iterator(fx.work / "runs/mel.volume/predictions")) {
    (void)e;
    ++predictions;
  }
  CHECK(predictions == 2);  // fold 1 holds two of six recordings

  SUBCASE("architecture mismatch is a descriptive validation error") {
    CHECK(run_cli(fx.args("evaluate", {"--features", "mel,tdoa", "--folds", "1", "--config",
                                       fx.dir.file("t.cfg").string(), "--checkpoint",
                                       (fx.work / "runs/mel.volume/fold1/model.ckpt").string()})) ==
          1);
  }

  SUBCASE("fold outside the manifest range is a validation error") {
    CHECK(run_cli(fx.args("train", {"--features", "mel", "--folds", "9", "--config",
                                    fx.dir.file("t.cfg").string()})) == 1);
  }
}

TEST_CASE("missing dataset root maps to exit code 2") {
  CHECK(run_cli({"extract", "--data", "/nonexistent/nowhere", "--out", "/tmp/x",
                 "--features", "mel"}) == 2);
}
