// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "binsed/cli.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "binsed/dsp.hpp"
#include "binsed/spatial.hpp"

namespace binsed {

namespace {

const std::vector<std::string> kCanonicalOrder = {"mel",     "mel-mono", "tdoa",
                                                  "gcc",     "domfreq",  "acr"};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    // trim
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string recording_id(const std::string& audio_path) {
  std::string id = audio_path;
  const auto dot = id.rfind('.');
  if (dot != std::string::npos) id = id.substr(0, dot);
  for (char& c : id) {
    if (c == '/' || c == '\\') c = '_';
  }
  return id;
}

std::filesystem::path volume_path(const ExperimentConfig& cfg, const ManifestEntry& entry,
                                  const std::string& feature) {
  return cfg.out_dir / "features" / (recording_id(entry.audio_path) + "." + feature + ".fv");
}

SpatialConfig spatial_config(const ExperimentConfig& cfg) {
  SpatialConfig sc;
  sc.dsp.sample_rate = cfg.sample_rate;
  return sc;
}

FeatureVolume extract_feature(const ExperimentConfig& cfg, const AudioClip& clip,
                              const std::string& feature) {
  const SpatialConfig sc = spatial_config(cfg);
  if (feature == "mel") return log_mel_energies(clip, sc.dsp);
  if (feature == "mel-mono") return log_mel_energies_downmix(clip, sc.dsp);
  if (feature == "tdoa") return extract_tdoa(clip, sc);
  if (feature == "gcc") return extract_gcc(clip, sc);
  if (feature == "domfreq") return extract_dom_freq(clip, sc);
  if (feature == "acr") return extract_acr(clip, sc);
  throw ValidationError("unknown feature '" + feature + "'");
}

struct FoldSplit {
  int test_fold = 0;
  int val_fold = 0;
  std::vector<const ManifestEntry*> train, val, test;
};

FoldSplit make_split(const DatasetManifest& manifest, int test_fold) {
  if (test_fold < 1 || test_fold > manifest.fold_count) {
    throw ValidationError("fold " + std::to_string(test_fold) + " outside the manifest range 1.." +
                          std::to_string(manifest.fold_count));
  }
  if (manifest.fold_count < 3) {
    throw ValidationError("training needs at least 3 folds (train/validation/test)");
  }
  FoldSplit split;
  split.test_fold = test_fold;
  split.val_fold = test_fold % manifest.fold_count + 1;
  for (const auto& e : manifest.entries) {
    if (e.fold == split.test_fold) {
      split.test.push_back(&e);
    } else if (e.fold == split.val_fold) {
      split.val.push_back(&e);
    } else {
      split.train.push_back(&e);
    }
  }
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw ValidationError("fold split " + std::to_string(test_fold) + " leaves an empty subset");
  }
  return split;
}

std::vector<int> selected_folds(const ExperimentConfig& cfg, const DatasetManifest& manifest) {
  if (cfg.folds.empty()) {
    std::vector<int> all(manifest.fold_count);
    for (int i = 0; i < manifest.fold_count; ++i) all[i] = i + 1;
    return all;
  }
  return cfg.folds;
}

/// Loads one recording's feature volumes (in model branch order) from disk.
std::vector<FeatureVolume> load_volumes(const ExperimentConfig& cfg, const ManifestEntry& entry) {
  std::vector<FeatureVolume> out;
  for (const auto& feature : cfg.features) {
    const auto path = volume_path(cfg, entry, feature);
    if (!std::filesystem::exists(path)) {
      throw ValidationError("missing feature file " + path.string() +
                            "; run 'binsed extract' first");
    }
    out.push_back(read_volume(path));
  }
  return out;
}

RecordingData build_recording(const ExperimentConfig& cfg, const DatasetManifest& manifest,
                              const ManifestEntry& entry,
                              const std::map<std::string, NormStats>& norms) {
  RecordingData rec;
  rec.id = recording_id(entry.audio_path);
  rec.context = entry.context;
  rec.fold = entry.fold;
  rec.volumes = load_volumes(cfg, entry);
  if (cfg.normalize) {
    for (std::size_t i = 0; i < rec.volumes.size(); ++i) {
      rec.volumes[i] = apply_normalizer(rec.volumes[i], norms.at(cfg.features[i]));
    }
  }
  const auto events = parse_annotations(manifest.annotation_file(entry));
  rec.targets = annotations_to_roll_frames(events, static_cast<std::size_t>(rec.frames()),
                                           manifest.class_list, rec.volumes[0].hop);
  return rec;
}

ModelConfig model_config(const ExperimentConfig& cfg, const std::vector<std::string>& classes) {
  ModelConfig mc;
  for (const auto& f : cfg.features) {
    mc.branches.push_back(make_branch_spec(f, cfg.layering, cfg.conv_filters));
  }
  mc.layering = cfg.layering;
  mc.lstm_units = cfg.lstm_units;
  mc.class_list = classes;
  return mc;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

/// Feature volumes are shared per corpus; models and reports live under a
/// per-experiment directory named by the feature set and layering mode.
std::string experiment_name(const ExperimentConfig& cfg) {
  std::string name;
  for (std::size_t i = 0; i < cfg.features.size(); ++i) {
    name += (i ? "+" : "") + cfg.features[i];
  }
  name += ".";
  name += layering_mode_name(cfg.layering);
  return name;
}

std::filesystem::path run_dir(const ExperimentConfig& cfg) {
  return cfg.out_dir / "runs" / experiment_name(cfg);
}

std::filesystem::path fold_checkpoint_path(const ExperimentConfig& cfg, int fold) {
  if (!cfg.checkpoint.empty()) return cfg.checkpoint;
  return run_dir(cfg) / ("fold" + std::to_string(fold)) / "model.ckpt";
}

void check_architecture(const ExperimentConfig& cfg, const LoadedModel& loaded) {
  std::vector<std::string> expected = cfg.features;
  std::vector<std::string> found;
  for (const auto& b : loaded.model.config.branches) found.push_back(b.feature);
  if (expected != found || cfg.layering != loaded.model.config.layering) {
    std::string msg = "checkpoint architecture mismatch: expected branches [";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      msg += (i ? "," : "") + expected[i];
    }
    msg += "] layering ";
    msg += layering_mode_name(cfg.layering);
    msg += ", checkpoint has [";
    for (std::size_t i = 0; i < found.size(); ++i) msg += (i ? "," : "") + found[i];
    msg += "] layering ";
    msg += layering_mode_name(loaded.model.config.layering);
    throw ValidationError(msg);
  }
}

/// Recording-level parallel loop that survives exceptions thrown inside
/// worker iterations (the first one, by index, is rethrown).
template <class F>
void parallel_entries(std::size_t n, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r\n");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto to_int = [&](const std::string& v) {
    try {
      return std::stoi(v);
    } catch (...) {
      throw ValidationError("config key '" + key + "': not an integer: '" + v + "'");
    }
  };
  auto to_double = [&](const std::string& v) {
    try {
      return std::stod(v);
    } catch (...) {
      throw ValidationError("config key '" + key + "': not a number: '" + v + "'");
    }
  };

  if (key == "dataset_root") {
    cfg.dataset_root = value;
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else if (key == "features") {
    cfg.features = split_list(value);
  } else if (key == "layering") {
    cfg.layering = parse_layering_mode(value);
  } else if (key == "folds") {
    cfg.folds.clear();
    for (const auto& f : split_list(value)) cfg.folds.push_back(to_int(f));
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
  } else if (key == "threads") {
    cfg.threads = to_int(value);
  } else if (key == "sample_rate") {
    cfg.sample_rate = to_int(value);
  } else if (key == "normalize") {
    cfg.normalize = to_int(value) != 0;
  } else if (key == "conv_filters") {
    cfg.conv_filters = to_int(value);
  } else if (key == "lstm_units") {
    cfg.lstm_units = to_int(value);
  } else if (key == "epochs") {
    cfg.train.max_epochs = to_int(value);
  } else if (key == "patience") {
    cfg.train.patience = to_int(value);
  } else if (key == "batch_size") {
    cfg.train.batch_size = to_int(value);
  } else if (key == "sequence_length") {
    cfg.train.sequence_length = to_int(value);
  } else if (key == "learning_rate") {
    cfg.train.learning_rate = to_double(value);
  } else if (key == "adam_beta1") {
    cfg.train.beta1 = to_double(value);
  } else if (key == "adam_beta2") {
    cfg.train.beta2 = to_double(value);
  } else if (key == "adam_epsilon") {
    cfg.train.epsilon = to_double(value);
  } else if (key == "dropout") {
    cfg.train.dropout = to_double(value);
  } else if (key == "threshold") {
    cfg.train.threshold = to_double(value);
  } else if (key == "min_improvement") {
    cfg.train.min_improvement = to_double(value);
  } else if (key == "segment_length") {
    cfg.train.segment_length = to_double(value);
  } else if (key == "checkpoint") {
    cfg.checkpoint = value;
  } else if (key == "synth_recordings") {
    cfg.synth.recordings = to_int(value);
  } else if (key == "synth_duration") {
    cfg.synth.duration = to_double(value);
  } else if (key == "synth_folds") {
    cfg.synth.folds = to_int(value);
  } else if (key == "synth_contexts") {
    cfg.synth.contexts = split_list(value);
  } else if (key == "synth_classes") {
    // label:f_low-f_high:delay entries separated by ';'
    cfg.synth.classes.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ';')) {
      SynthClassSpec cls;
      char label[64];
      if (std::sscanf(item.c_str(), "%63[^:]:%lf-%lf:%d", label, &cls.f_low, &cls.f_high,
                      &cls.delay) != 4) {
        throw ValidationError("config synth_classes: malformed entry '" + item +
                              "' (want label:flow-fhigh:delay)");
      }
      cls.label = label;
      cfg.synth.classes.push_back(cls);
    }
  } else if (key == "synth_mean_gap") {
    cfg.synth.mean_gap = to_double(value);
  } else if (key == "synth_event_min") {
    cfg.synth.event_min = to_double(value);
  } else if (key == "synth_event_max") {
    cfg.synth.event_max = to_double(value);
  } else if (key == "synth_gain_low") {
    cfg.synth.gain_low = to_double(value);
  } else if (key == "synth_gain_high") {
    cfg.synth.gain_high = to_double(value);
  } else if (key == "synth_noise") {
    cfg.synth.noise_level = to_double(value);
  } else if (key == "synth_density") {
    cfg.synth.density = to_double(value);
  } else if (key == "synth_tones") {
    cfg.synth.tones_per_event = to_int(value);
  } else {
    throw ValidationError("unknown config key '" + key + "'");
  }
}

void canonicalize_features(ExperimentConfig& cfg) {
  std::vector<std::string> resolved;
  for (auto name : cfg.features) {
    if (name == "mel-monaural") name = "mel-mono";
    if (name == "mel-concat") {
      cfg.layering = LayeringMode::concat;
      name = "mel";
    }
    if (!is_known_feature(name)) {
      throw ValidationError("unknown feature '" + name +
                            "' (known: mel, mel-mono, tdoa, gcc, domfreq, acr)");
    }
    resolved.push_back(name);
  }
  if (resolved.empty()) throw ValidationError("feature set must not be empty");
  std::vector<std::string> ordered;
  for (const auto& name : kCanonicalOrder) {
    if (std::find(resolved.begin(), resolved.end(), name) != resolved.end()) {
      ordered.push_back(name);
    }
  }
  cfg.features = ordered;
}

int cmd_extract(const ExperimentConfig& cfg) {
  const auto manifest = build_manifest(cfg.dataset_root);
  std::filesystem::create_directories(cfg.out_dir / "features");

  std::atomic<int> written{0}, skipped{0};
  parallel_entries(manifest.entries.size(), [&](std::size_t i) {
    const auto& entry = manifest.entries[i];
    const auto wav_path = manifest.audio_file(entry);
    const auto wav_time = std::filesystem::last_write_time(wav_path);

    std::vector<std::string> todo;
    for (const auto& feature : cfg.features) {
      const auto out = volume_path(cfg, entry, feature);
      if (!cfg.force && std::filesystem::exists(out) &&
          std::filesystem::last_write_time(out) >= wav_time) {
        ++skipped;
        continue;
      }
      todo.push_back(feature);
    }
    if (todo.empty()) return;

    const auto clip = read_wav(wav_path, cfg.sample_rate);
    for (const auto& feature : todo) {
      write_volume(volume_path(cfg, entry, feature), extract_feature(cfg, clip, feature));
      ++written;
    }
  });

  std::cout << "extract: wrote " << written.load() << " volume file(s), skipped "
            << skipped.load() << " up-to-date\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  const auto manifest = build_manifest(cfg.dataset_root);

  for (const int fold : selected_folds(cfg, manifest)) {
    const auto split = make_split(manifest, fold);

    // Per-feature normalization statistics from the training split only.
    std::map<std::string, NormStats> norms;
    std::map<std::string, std::vector<FeatureVolume>> train_raw;
    for (const auto* e : split.train) {
      auto vols = load_volumes(cfg, *e);
      for (std::size_t i = 0; i < cfg.features.size(); ++i) {
        train_raw[cfg.features[i]].push_back(std::move(vols[i]));
      }
    }
    for (const auto& feature : cfg.features) {
      std::vector<const FeatureVolume*> ptrs;
      for (const auto& v : train_raw[feature]) ptrs.push_back(&v);
      norms.emplace(feature, fit_normalizer(ptrs));
    }

    std::vector<RecordingData> train_set, val_set;
    for (const auto* e : split.train) train_set.push_back(build_recording(cfg, manifest, *e, norms));
    for (const auto* e : split.val) val_set.push_back(build_recording(cfg, manifest, *e, norms));
    train_raw.clear();

    Model<float> model(model_config(cfg, manifest.class_list));
    Rng init_rng(splitmix64(cfg.seed ^ static_cast<std::uint64_t>(fold)));
    model.init_params(init_rng);

    TrainConfig tc = cfg.train;
    tc.seed = splitmix64(cfg.seed * 1315423911ULL + static_cast<std::uint64_t>(fold));
    const auto result = train_model(model, train_set, val_set, manifest.contexts, tc);

    const auto fold_dir = run_dir(cfg) / ("fold" + std::to_string(fold));
    std::filesystem::create_directories(fold_dir);

    Checkpoint meta;
    meta.config = model.config;
    if (cfg.normalize) meta.norms = norms;
    meta.sample_rate = cfg.sample_rate;
    meta.hop = train_set[0].volumes[0].hop;
    meta.normalize = cfg.normalize;
    save_checkpoint(fold_dir / "model.ckpt", model, meta);
    write_text_file(fold_dir / "history.txt", format_history(result.history));

    std::cout << "train: fold " << fold << " best epoch " << result.best_epoch << " val F "
              << format_double(result.best_f, 4) << " (" << result.history.size()
              << " epochs run)\n";
  }
  return 0;
}

namespace {

std::vector<ScoredRecording> score_folds(const ExperimentConfig& cfg,
                                         const DatasetManifest& manifest,
                                         std::vector<std::string>* class_list_out) {
  std::vector<ScoredRecording> scored;
  for (const int fold : selected_folds(cfg, manifest)) {
    const auto ckpt_path = fold_checkpoint_path(cfg, fold);
    if (!std::filesystem::exists(ckpt_path)) {
      throw ValidationError("missing checkpoint " + ckpt_path.string() +
                            "; run 'binsed train' first");
    }
    const auto loaded = load_checkpoint(ckpt_path);
    check_architecture(cfg, loaded);
    if (class_list_out) *class_list_out = loaded.model.config.class_list;

    const auto split = make_split(manifest, fold);
    for (const auto* e : split.test) {
      ScoredRecording s;
      s.id = recording_id(e->audio_path);
      s.context = e->context;

      auto volumes = load_volumes(cfg, *e);
      if (loaded.meta.normalize) {
        for (std::size_t i = 0; i < volumes.size(); ++i) {
          volumes[i] = apply_normalizer(volumes[i], loaded.meta.norms.at(cfg.features[i]));
        }
      }
      s.system = predict_roll(loaded.model, volumes, loaded.model.config.class_list,
                              cfg.train.threshold, cfg.train.sequence_length);
      const auto events = parse_annotations(manifest.annotation_file(*e));
      s.reference = annotations_to_roll_frames(events, s.system.frames,
                                               loaded.model.config.class_list, volumes[0].hop);
      scored.push_back(std::move(s));
    }
  }
  return scored;
}

}  // namespace

int cmd_evaluate(const ExperimentConfig& cfg) {
  const auto manifest = build_manifest(cfg.dataset_root);
  const auto scored = score_folds(cfg, manifest, nullptr);
  const auto report = evaluate_by_context(scored, manifest.contexts, cfg.train.segment_length);

  std::filesystem::create_directories(run_dir(cfg));
  const std::string table = format_report_table(report);
  write_text_file(run_dir(cfg) / "report.txt", table);
  write_text_file(run_dir(cfg) / "report.kv", format_report_kv(report));
  std::cout << table;
  return 0;
}

int cmd_predict(const ExperimentConfig& cfg) {
  const auto manifest = build_manifest(cfg.dataset_root);
  const auto scored = score_folds(cfg, manifest, nullptr);

  const auto pred_dir = run_dir(cfg) / "predictions";
  std::filesystem::create_directories(pred_dir);
  for (const auto& s : scored) {
    write_annotations(pred_dir / (s.id + ".txt"), roll_to_events(s.system));
  }
  std::cout << "predict: wrote " << scored.size() << " event list(s) to " << pred_dir.string()
            << "\n";
  return 0;
}

int cmd_synth(const ExperimentConfig& cfg) {
  SynthSpec spec = cfg.synth;
  spec.seed = cfg.seed;
  spec.sample_rate = cfg.sample_rate;
  generate_corpus(spec, cfg.out_dir);
  std::cout << "synth: wrote " << spec.recordings << " recording(s) ("
            << format_double(spec.duration, 1) << " s each, " << spec.classes.size()
            << " classes, " << spec.contexts.size() << " contexts) to " << cfg.out_dir.string()
            << "\n";
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"binaural sound event detection toolkit"};
  app.require_subcommand(1);

  std::string config_path, data, out, features_csv, layering, folds_csv, checkpoint;
  std::int64_t seed = -1;
  int threads = -1;
  bool force = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--data", data, "dataset root directory (contains manifest.tsv)");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--features", features_csv, "comma-separated feature list");
    cmd->add_option("--layering", layering, "volume | concat");
    cmd->add_option("--folds", folds_csv, "comma-separated test fold list");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--threads", threads, "worker threads (0 = deterministic single-threaded)");
    cmd->add_flag("--force", force, "overwrite up-to-date outputs");
    cmd->add_option("--checkpoint", checkpoint, "explicit checkpoint path");
  };

  CLI::App* c_extract = app.add_subcommand("extract", "compute feature volumes");
  CLI::App* c_train = app.add_subcommand("train", "train a detector per fold");
  CLI::App* c_evaluate = app.add_subcommand("evaluate", "score test folds");
  CLI::App* c_predict = app.add_subcommand("predict", "write predicted event lists");
  CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic corpus");
  for (auto* c : {c_extract, c_train, c_evaluate, c_predict, c_synth}) add_common(c);

  std::vector<const char*> argv;
  argv.push_back("binsed");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      for (const auto& [k, v] : parse_config_file(config_path)) apply_config_entry(cfg, k, v);
    }
    if (!data.empty()) cfg.dataset_root = data;
    if (!out.empty()) cfg.out_dir = out;
    if (!features_csv.empty()) cfg.features = split_list(features_csv);
    if (!layering.empty()) cfg.layering = parse_layering_mode(layering);
    if (!folds_csv.empty()) {
      cfg.folds.clear();
      for (const auto& f : split_list(folds_csv)) cfg.folds.push_back(std::stoi(f));
    }
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (threads >= 0) cfg.threads = threads;
    if (force) cfg.force = true;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;

    canonicalize_features(cfg);
    set_thread_count(cfg.threads);

    if (app.got_subcommand(c_extract)) return cmd_extract(cfg);
    if (app.got_subcommand(c_train)) return cmd_train(cfg);
    if (app.got_subcommand(c_evaluate)) return cmd_evaluate(cfg);
    if (app.got_subcommand(c_predict)) return cmd_predict(cfg);
    if (app.got_subcommand(c_synth)) return cmd_synth(cfg);
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace binsed
