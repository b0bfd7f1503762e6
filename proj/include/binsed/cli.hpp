// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "binsed/model.hpp"
#include "binsed/synth.hpp"
#include "binsed/train.hpp"

namespace binsed {

/// Everything a run needs; populated from built-in defaults, then the
/// `--config` file, then explicit command-line flags (later wins).
struct ExperimentConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path out_dir = "out";
  std::vector<std::string> features{"mel"};
  LayeringMode layering = LayeringMode::volume;
  std::vector<int> folds;  // test folds; empty = every fold in the manifest
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = strict single-threaded
  bool force = false;
  int sample_rate = 44100;
  bool normalize = true;
  int conv_filters = 100;
  int lstm_units = 128;
  TrainConfig train;
  SynthSpec synth;
  std::filesystem::path checkpoint;  // optional explicit path for evaluate/predict
};

/// Line-oriented "key = value" file; '#' starts a comment.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Normalizes the feature list: resolves aliases (mel-monaural, mel-concat),
/// validates names, removes duplicates and orders branches canonically.
void canonicalize_features(ExperimentConfig& cfg);

int cmd_extract(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_evaluate(const ExperimentConfig& cfg);
int cmd_predict(const ExperimentConfig& cfg);
int cmd_synth(const ExperimentConfig& cfg);

/// Full argv-level entry point; maps validation errors to exit code 1 and
/// I/O errors to 2.
int run_cli(const std::vector<std::string>& args);

}  // namespace binsed
