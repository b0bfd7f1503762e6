// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: nine verifiable properties of the toolkit, from exact
// metric arithmetic to a full synthetic training experiment. Each criterion
// prints one PASS/FAIL line; the process exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "binsed/cli.hpp"
#include "binsed/dsp.hpp"
#include "binsed/metrics.hpp"
#include "binsed/spatial.hpp"
#include "binsed/synth.hpp"
#include "binsed/train.hpp"
#include "reference.hpp"

using namespace binsed;
namespace fs = std::filesystem;

namespace {

struct CriterionResult {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << (detail.str().empty() ? "" : "; ") << what;
    }
  }
  void note(const std::string& what) {
    detail << (detail.str().empty() ? "" : "; ") << what;
  }
};

fs::path g_work;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  out << text;
}

double parse_kv(const fs::path& report, const std::string& key) {
  std::ifstream in(report);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + "=", 0) == 0) return std::stod(line.substr(key.size() + 1));
  }
  throw std::runtime_error("key " + key + " not found in " + report.string());
}

int cli(const std::vector<std::string>& args) { return run_cli(args); }

// ---------------------------------------------------------------------------
// 1. Metric oracle equivalence.
// ---------------------------------------------------------------------------

void criterion_metric_oracle(CriterionResult& r) {
  Rng rng(777);
  for (int trial = 0; trial < 100; ++trial) {
    const int segments = static_cast<int>(rng.uniform_int(1, 5));
    const int classes = static_cast<int>(rng.uniform_int(1, 4));
    SegmentSets ref(segments), sys(segments);
    for (int s = 0; s < segments; ++s) {
      for (int c = 0; c < classes; ++c) {
        if (rng.uniform() < 0.45) ref[s].push_back(c);
        if (rng.uniform() < 0.45) sys[s].push_back(c);
      }
    }
    const auto counts = count_segments(ref, sys);
    const auto want = reference::naive_segment_scores(ref, sys);
    r.require(counts.tp == want.tp && counts.fp == want.fp && counts.fn == want.fn &&
                  counts.n == want.n && counts.s == want.s && counts.d == want.d &&
                  counts.i == want.i,
              "count mismatch in trial " + std::to_string(trial));
    r.require(f_score(counts) == want.f(), "F mismatch in trial " + std::to_string(trial));
    if (want.er_defined()) {
      r.require(error_rate(counts) == want.er(), "ER mismatch in trial " + std::to_string(trial));
    }
  }
  r.note("100 randomized cases, integer-exact");
}

// ---------------------------------------------------------------------------
// 2. Hand-checked metric values.
// ---------------------------------------------------------------------------

void criterion_hand_metrics(CriterionResult& r) {
  SegmentCounts mixed;
  mixed.add_segment({0, 1}, {0, 2});  // ref {A,B} vs sys {A,C}
  r.require(f_score(mixed) == 0.5, "F(ref {A,B}, sys {A,C}) != 0.5");
  r.require(error_rate(mixed) == 0.5, "ER(ref {A,B}, sys {A,C}) != 0.5");
  r.require(mixed.s == 1 && mixed.d == 0 && mixed.i == 0, "S/D/I decomposition wrong");

  SegmentCounts missed;
  missed.add_segment({0, 1}, {});
  r.require(error_rate(missed) == 1.0, "ER(sys empty) != 1.0");
  r.require(f_score(missed) == 0.0, "F(sys empty) != 0");
  r.note("exact");
}

// ---------------------------------------------------------------------------
// 3. GCC-PHAT/TDOA delay recovery across d in {-20..20}.
// ---------------------------------------------------------------------------

void criterion_delay_recovery(CriterionResult& r) {
  SpatialConfig cfg;
  double worst_ratio = 2.0;
  int worst_delay = 0;
  for (int delay = -20; delay <= 20; ++delay) {
    const auto clip =
        make_delayed_noise_clip(1.0, 44100, delay, 9000 + static_cast<std::uint64_t>(delay + 20));
    const auto vol = extract_tdoa(clip, cfg);
    const int first = 12, last = vol.frames - 13;  // interior of the 480 ms window
    for (int res = 0; res < 3; ++res) {
      for (int band = 0; band < 5; ++band) {
        int hits = 0, total = 0;
        for (int t = first; t <= last; ++t) {
          ++total;
          if (vol.at(t, band, res) == static_cast<float>(delay)) ++hits;
        }
        const double ratio = static_cast<double>(hits) / total;
        if (ratio < worst_ratio) {
          worst_ratio = ratio;
          worst_delay = delay;
        }
        r.require(ratio >= 0.95, "delay " + std::to_string(delay) + " band " +
                                     std::to_string(band) + " res " + std::to_string(res) +
                                     ": " + std::to_string(hits) + "/" + std::to_string(total));
      }
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "worst recovery %.1f%% at d=%d", 100.0 * worst_ratio,
                worst_delay);
  r.note(buf);
}

// ---------------------------------------------------------------------------
// 4. Dominant-frequency accuracy.
// ---------------------------------------------------------------------------

void criterion_domfreq(CriterionResult& r) {
  SpatialConfig cfg;
  double worst = 0.0;
  for (const double freq : {250.0, 440.0, 1000.0, 3500.0}) {
    const auto clip = make_tone_clip(freq, 1.0, 44100, 0.4, 2);
    const auto vol = extract_dom_freq(clip, cfg);
    for (int t = 5; t < vol.frames - 5; ++t) {
      for (int c = 0; c < 2; ++c) {
        const double err = std::abs(static_cast<double>(vol.at(t, 0, c)) - freq);
        worst = std::max(worst, err);
        r.require(err <= 0.5, std::to_string(freq) + " Hz off by " + std::to_string(err) +
                                  " Hz at frame " + std::to_string(t));
      }
    }
  }
  AudioClip silence;
  silence.sample_rate = 44100;
  silence.samples.assign(2, std::vector<float>(44100, 0.0f));
  const auto vol = extract_dom_freq(silence, cfg);
  for (float v : vol.data) {
    if (v != 0.0f) {
      r.require(false, "silence produced a nonzero dom-freq cell");
      break;
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "worst tone error %.4f Hz", worst);
  r.note(buf);
}

// ---------------------------------------------------------------------------
// 5. Shape conformance.
// ---------------------------------------------------------------------------

void criterion_shapes(CriterionResult& r) {
  SpatialConfig cfg;
  const auto clip = make_delayed_noise_clip(1.0, 44100, 6, 555);

  const auto mel = log_mel_energies(clip, cfg.dsp);
  const auto tdoa = extract_tdoa(clip, cfg);
  const auto gcc = extract_gcc(clip, cfg);
  const auto domfreq = extract_dom_freq(clip, cfg);
  const auto acr = extract_acr(clip, cfg);

  auto shape_is = [&](const FeatureVolume& v, int l, int c, const char* name) {
    r.require(v.length == l && v.layers == c,
              std::string(name) + " shape " + std::to_string(v.length) + "x" +
                  std::to_string(v.layers));
  };
  shape_is(mel, 40, 2, "mel");
  shape_is(tdoa, 5, 3, "tdoa");
  shape_is(gcc, 60, 3, "gcc");
  shape_is(domfreq, 3, 4, "domfreq");
  shape_is(acr, 400, 2, "acr");
  const int T = mel.frames;
  r.require(tdoa.frames == T && gcc.frames == T && domfreq.frames == T && acr.frames == T,
            "extractors disagree on T");

  // Default (100-filter) branches must reduce mel/gcc/acr maps to T x 5 x 100.
  ModelConfig mc;
  for (const auto* f : {"mel", "tdoa", "gcc", "domfreq", "acr"}) {
    mc.branches.push_back(make_branch_spec(f, LayeringMode::volume));
  }
  mc.lstm_units = 8;  // small recurrent stage, the branch shapes are what matter
  mc.class_list = {"a", "b"};
  Model<float> model(mc);
  Rng rng(1);
  model.init_params(rng);

  SequenceBatchItem<float> item;
  const std::vector<const FeatureVolume*> vols{&mel, &tdoa, &gcc, &domfreq, &acr};
  for (std::size_t b = 0; b < mc.branches.size(); ++b) {
    item.branch_inputs.push_back(slice_branch_input(*vols[b], mc.branches[b], 0, T));
  }
  item.targets = Mat<float>(T, 2);
  item.frame_mask.assign(T, 1);

  ForwardCache<float> cache;
  Rng fwd(2);
  std::vector<SequenceBatchItem<float>> batch{std::move(item)};
  forward_train(model, batch, 0.0f, fwd, cache, false);

  const std::map<std::string, std::pair<int, int>> expect{
      {"mel", {5, 100}}, {"tdoa", {5, 100}}, {"gcc", {5, 100}},
      {"domfreq", {3, 100}}, {"acr", {5, 100}}};
  for (std::size_t b = 0; b < mc.branches.size(); ++b) {
    const auto& post = cache.branches[b].back().post[0];
    const auto want = expect.at(mc.branches[b].feature);
    r.require(post.d0 == T && post.d1 == want.first && post.d2 == want.second,
              mc.branches[b].feature + " maps " + std::to_string(post.d0) + "x" +
                  std::to_string(post.d1) + "x" + std::to_string(post.d2));
  }
  r.note("T=" + std::to_string(T) + ", all five extractors plus branch maps");
}

// ---------------------------------------------------------------------------
// 6. Gradient verification.
// ---------------------------------------------------------------------------

ModelConfig toy_config() {
  ModelConfig mc;
  BranchSpec a;
  a.feature = "bandsA";
  a.type = FeatureType::mel;
  a.input_length = 8;
  a.input_layers = 2;
  a.blocks.push_back({4, 3, 3, 2});
  a.blocks.push_back({4, 3, 3, 2});
  mc.branches.push_back(a);
  BranchSpec b;
  b.feature = "lagsB";
  b.type = FeatureType::tdoa;
  b.input_length = 5;
  b.input_layers = 3;
  b.blocks.push_back({4, 3, 3, 1});
  mc.branches.push_back(b);
  mc.lstm_units = 4;
  mc.class_list = {"x", "y", "z"};
  return mc;
}

void criterion_gradients(CriterionResult& r) {
  const double h = 1e-4;
  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
  };
  auto close = [&](double a, double b, double tol) {
    return (std::abs(a) < 1e-10 && std::abs(b) < 1e-10) || rel(a, b) < tol;
  };

  // Isolated feedforward kernels at 1e-4.
  {
    Rng rng(900);
    const ConvDims d{2, 3, 3, 3};
    Ten3<double> in(5, 6, 2), coeff(5, 6, 3);
    for (auto& v : in.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : coeff.v) v = rng.uniform(-1.0, 1.0);
    std::vector<double> w(d.weight_count()), b(3);
    for (auto& v : w) v = rng.uniform(-0.7, 0.7);
    for (auto& v : b) v = rng.uniform(-0.3, 0.3);
    auto loss = [&]() {
      Ten3<double> out(5, 6, 3);
      conv2d_forward(in, d, w.data(), b.data(), out);
      double acc = 0.0;
      for (std::size_t i = 0; i < out.v.size(); ++i) acc += out.v[i] * coeff.v[i];
      return acc;
    };
    std::vector<double> dw(w.size(), 0.0), db(b.size(), 0.0);
    std::vector<const Ten3<double>*> ins{&in};
    std::vector<Ten3<double>> douts{coeff};
    conv2d_backward_params(ins, douts, d, dw.data(), db.data());
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss();
      w[i] = saved - h;
      const double down = loss();
      w[i] = saved;
      if (!close(dw[i], (up - down) / (2 * h), 1e-4)) {
        r.require(false, "conv weight gradient");
        break;
      }
    }
  }

  // Batch norm (through the batch statistics) at 1e-4.
  {
    Rng rng(901);
    std::vector<Ten3<double>> xs{Ten3<double>(4, 3, 2), Ten3<double>(4, 3, 2)};
    std::vector<Ten3<double>> coeff{Ten3<double>(4, 3, 2), Ten3<double>(4, 3, 2)};
    for (auto& t : xs) {
      for (auto& v : t.v) v = rng.uniform(-1.0, 1.0);
    }
    for (auto& t : coeff) {
      for (auto& v : t.v) v = rng.uniform(-1.0, 1.0);
    }
    std::vector<double> gamma{1.2, 0.7}, beta{0.1, -0.2};
    auto loss = [&]() {
      const auto st = bn_compute_stats(xs);
      double acc = 0.0;
      for (std::size_t e = 0; e < xs.size(); ++e) {
        Ten3<double> out(4, 3, 2);
        bn_apply(xs[e], st.mean.data(), st.var.data(), gamma.data(), beta.data(), out);
        for (std::size_t i = 0; i < out.v.size(); ++i) acc += out.v[i] * coeff[e].v[i];
      }
      return acc;
    };
    const auto st = bn_compute_stats(xs);
    std::vector<double> dgamma(2, 0.0), dbeta(2, 0.0);
    std::vector<Ten3<double>> dxs{Ten3<double>(4, 3, 2), Ten3<double>(4, 3, 2)};
    bn_backward(xs, coeff, st, gamma.data(), dgamma.data(), dbeta.data(), dxs);
    bool ok = true;
    for (std::size_t e = 0; e < xs.size() && ok; ++e) {
      for (std::size_t i = 0; i < xs[e].v.size() && ok; ++i) {
        const double saved = xs[e].v[i];
        xs[e].v[i] = saved + h;
        const double up = loss();
        xs[e].v[i] = saved - h;
        const double down = loss();
        xs[e].v[i] = saved;
        ok = close(dxs[e].v[i], (up - down) / (2 * h), 1e-4);
      }
    }
    r.require(ok, "batch norm input gradient");
  }

  // Composed network (conv + bn + pool + BiLSTM + output + BCE) at 1e-3,
  // every block sampled.
  {
    Rng rng(902);
    Model<double> model(toy_config());
    model.init_params(rng);
    std::vector<SequenceBatchItem<double>> batch;
    for (int e = 0; e < 2; ++e) {
      SequenceBatchItem<double> item;
      for (const auto& spec : model.config.branches) {
        Ten3<double> in(6, spec.input_length, spec.input_layers);
        for (auto& v : in.v) v = rng.uniform(-1.0, 1.0);
        item.branch_inputs.push_back(std::move(in));
      }
      item.targets = Mat<double>(6, 3);
      for (auto& v : item.targets.v) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
      item.frame_mask.assign(6, 1);
      batch.push_back(std::move(item));
    }
    auto loss = [&]() {
      ForwardCache<double> cache;
      Rng fwd(55);
      forward_train(model, batch, 0.0, fwd, cache, false);
      return batch_loss(cache, batch);
    };
    ForwardCache<double> cache;
    Rng fwd(55);
    forward_train(model, batch, 0.0, fwd, cache, false);
    std::vector<double> grads(model.params.data.size());
    backward(model, batch, cache, grads);

    int checked = 0, failures = 0;
    double worst = 0.0;
    for (const auto& blk : model.params.blocks) {
      const std::size_t stride = blk.count <= 32 ? 1 : blk.count / 32;
      for (std::size_t i = 0; i < blk.count; i += stride) {
        const std::size_t idx = blk.offset + i;
        const double saved = model.params.data[idx];
        model.params.data[idx] = saved + h;
        const double up = loss();
        model.params.data[idx] = saved - h;
        const double down = loss();
        model.params.data[idx] = saved;
        const double fd = (up - down) / (2 * h);
        ++checked;
        if (!close(grads[idx], fd, 1e-3)) {
          ++failures;
          worst = std::max(worst, rel(grads[idx], fd));
        }
      }
    }
    r.require(failures == 0, "composed model: " + std::to_string(failures) + "/" +
                                 std::to_string(checked) + " params failed (worst rel " +
                                 std::to_string(worst) + ")");
    r.note("composed check over " + std::to_string(checked) + " sampled parameters");
  }
}

// ---------------------------------------------------------------------------
// 7 & 8. Synthetic end-to-end experiments.
// ---------------------------------------------------------------------------

struct ExperimentSetup {
  fs::path corpus;
  fs::path work;
  fs::path config;
};

ExperimentSetup prepare_corpus(const std::string& tag, const std::string& synth_extras,
                               int epochs, std::uint64_t seed) {
  ExperimentSetup s;
  s.corpus = g_work / (tag + "_corpus");
  s.work = g_work / (tag + "_work");
  s.config = g_work / (tag + ".cfg");
  write_file(s.config,
             "conv_filters = 32\n"
             "lstm_units = 64\n"
             "epochs = " + std::to_string(epochs) + "\n"
             "patience = 50\n" +
             synth_extras);
  if (cli({"synth", "--out", s.corpus.string(), "--seed", std::to_string(seed), "--threads",
           std::to_string(hardware_threads()), "--config", s.config.string()}) != 0) {
    throw std::runtime_error("synth failed for " + tag);
  }
  return s;
}

void run_experiment(const ExperimentSetup& s, const std::string& features,
                    const std::string& layering = "volume") {
  const auto threads = std::to_string(hardware_threads());
  for (const char* cmd : {"extract", "train", "evaluate"}) {
    std::vector<std::string> args{cmd,      "--data",     s.corpus.string(),
                                  "--out",  s.work.string(), "--features", features,
                                  "--seed", "17",         "--threads",  threads,
                                  "--config", s.config.string(), "--layering", layering};
    if (std::string(cmd) != "extract") {
      args.push_back("--folds");
      args.push_back("1");
    }
    if (cli(args) != 0) {
      throw std::runtime_error(std::string(cmd) + " failed for " + features);
    }
  }
}

double experiment_f(const ExperimentSetup& s, const std::string& exp_name) {
  return parse_kv(s.work / "runs" / exp_name / "report.kv", "overall.F");
}

/// Best identity-blind strategy on the test fold: the better of the constant
/// predictors and a perfect activity detector that cannot tell classes apart.
double blind_oracle_f(const fs::path& corpus) {
  const auto manifest = build_manifest(corpus);
  SegmentCounts activity, both, only_a, only_b;
  for (const auto& e : manifest.entries) {
    if (e.fold != 1) continue;
    const auto clip = read_wav(manifest.audio_file(e));
    const auto events = parse_annotations(manifest.annotation_file(e));
    const auto roll = annotations_to_roll(events, clip.duration(), manifest.class_list, 0.02);
    const auto ref = roll_to_segments(roll, 1.0);
    SegmentSets all_on(ref.size()), a_on(ref.size()), b_on(ref.size()), act(ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
      all_on[k] = {0, 1};
      a_on[k] = {0};
      b_on[k] = {1};
      if (!ref[k].empty()) act[k] = {0, 1};
    }
    activity.merge(count_segments(ref, act));
    both.merge(count_segments(ref, all_on));
    only_a.merge(count_segments(ref, a_on));
    only_b.merge(count_segments(ref, b_on));
  }
  return std::max({f_score(activity), f_score(both), f_score(only_a), f_score(only_b), 0.0});
}

ExperimentSetup g_corpus_a;  // shared between criteria 7 and 8

void criterion_end_to_end(CriterionResult& r) {
  // Corpus A: classes separated in both band and delay.
  g_corpus_a = prepare_corpus("corpusA",
                              "synth_classes = alarm:300-1200:8;siren:1800-4500:-8\n", 10, 17);
  run_experiment(g_corpus_a, "mel");
  run_experiment(g_corpus_a, "mel,tdoa");
  const double f_mel_a = experiment_f(g_corpus_a, "mel.volume");
  const double f_both_a = experiment_f(g_corpus_a, "mel+tdoa.volume");
  r.require(f_mel_a >= 0.80, "corpus A mel F " + std::to_string(f_mel_a) + " < 0.80");
  r.require(f_both_a >= 0.80, "corpus A mel+tdoa F " + std::to_string(f_both_a) + " < 0.80");

  // Corpus B: identical spectra, classes distinguishable only by delay.
  const auto setup_b = prepare_corpus("corpusB",
                                      "synth_classes = alarm:500-3500:8;siren:500-3500:-8\n"
                                      "synth_mean_gap = 6.0\n"
                                      "synth_event_min = 0.8\n"
                                      "synth_event_max = 1.6\n",
                                      20, 11);
  run_experiment(setup_b, "mel");
  run_experiment(setup_b, "mel,tdoa");
  const double f_mel_b = experiment_f(setup_b, "mel.volume");
  const double f_both_b = experiment_f(setup_b, "mel+tdoa.volume");
  const double blind = blind_oracle_f(setup_b.corpus);

  r.require(f_both_b >= 0.80, "corpus B mel+tdoa F " + std::to_string(f_both_b) + " < 0.80");
  r.require(f_both_b > f_mel_b, "corpus B: mel+tdoa does not beat mel-only");
  r.require(f_mel_b <= blind + 0.05, "corpus B mel F " + std::to_string(f_mel_b) +
                                         " above the blind ceiling " + std::to_string(blind));

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "A: mel %.3f, mel+tdoa %.3f | B: mel %.3f (blind %.3f), mel+tdoa %.3f",
                f_mel_a, f_both_a, f_mel_b, blind, f_both_b);
  r.note(buf);
}

void criterion_volume_vs_concat(CriterionResult& r) {
  // Same corpus and budget as the volume-mode mel run of criterion 7.
  run_experiment(g_corpus_a, "mel", "concat");
  const double f_volume = experiment_f(g_corpus_a, "mel.volume");
  const double f_concat = experiment_f(g_corpus_a, "mel.concat");
  const double er_volume = parse_kv(g_corpus_a.work / "runs/mel.volume/report.kv", "overall.ER");
  const double er_concat = parse_kv(g_corpus_a.work / "runs/mel.concat/report.kv", "overall.ER");
  r.require(std::isfinite(f_volume) && std::isfinite(f_concat) && std::isfinite(er_volume) &&
                std::isfinite(er_concat),
            "reports missing or unparsable");

  // Both arrangements carry exactly the same values.
  const auto vol =
      read_volume(g_corpus_a.work / "features" / "audio_rec000.mel.fv");
  auto concat = volume_to_concat(vol);
  auto a = vol.data;
  auto b = concat.data;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  r.require(a == b, "volume and concat arrangements differ as multisets");

  char buf[120];
  std::snprintf(buf, sizeof(buf), "volume F %.3f / ER %.3f, concat F %.3f / ER %.3f", f_volume,
                er_volume, f_concat, er_concat);
  r.note(buf);
}

// ---------------------------------------------------------------------------
// 9. Determinism.
// ---------------------------------------------------------------------------

void criterion_determinism(CriterionResult& r) {
  const fs::path cfg_path = g_work / "det.cfg";
  write_file(cfg_path,
             "conv_filters = 8\n"
             "lstm_units = 8\n"
             "epochs = 2\n"
             "batch_size = 8\n"
             "synth_recordings = 6\n"
             "synth_duration = 4\n"
             "synth_folds = 3\n"
             "synth_mean_gap = 1.0\n"
             "synth_event_min = 0.4\n"
             "synth_event_max = 1.2\n");

  std::vector<std::string> histories, reports, kvs;
  for (int run = 0; run < 2; ++run) {
    const fs::path corpus = g_work / ("det_corpus_" + std::to_string(run));
    const fs::path work = g_work / ("det_work_" + std::to_string(run));
    auto base = [&](const char* cmd) {
      return std::vector<std::string>{cmd,   "--data",   corpus.string(), "--out",
                                      work.string(), "--features", "mel",
                                      "--seed", "23",    "--threads", "0",
                                      "--config", cfg_path.string()};
    };
    if (cli({"synth", "--out", corpus.string(), "--seed", "23", "--threads", "0", "--config",
             cfg_path.string()}) != 0) {
      throw std::runtime_error("determinism synth failed");
    }
    auto extract = base("extract");
    if (cli(extract) != 0) throw std::runtime_error("determinism extract failed");
    auto train = base("train");
    train.push_back("--folds");
    train.push_back("1");
    if (cli(train) != 0) throw std::runtime_error("determinism train failed");
    auto eval = base("evaluate");
    eval.push_back("--folds");
    eval.push_back("1");
    if (cli(eval) != 0) throw std::runtime_error("determinism evaluate failed");

    histories.push_back(read_file(work / "runs/mel.volume/fold1/history.txt"));
    reports.push_back(read_file(work / "runs/mel.volume/report.txt"));
    kvs.push_back(read_file(work / "runs/mel.volume/report.kv"));
  }
  r.require(!histories[0].empty(), "history file empty");
  r.require(histories[0] == histories[1], "history files differ between runs");
  r.require(reports[0] == reports[1], "report tables differ between runs");
  r.require(kvs[0] == kvs[1], "key-value reports differ between runs");
  r.note("byte-identical history and reports across two seeded runs");
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(CriterionResult&)> run;
  double budget_seconds;  // 0 = no pinned bound
};

}  // namespace

int main(int argc, char** argv) {
  g_work = fs::temp_directory_path() / "binsed_acceptance";
  if (argc > 1) g_work = argv[1];
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  set_thread_count(hardware_threads());

  const std::vector<Criterion> criteria{
      {1, "metric-oracle-equivalence", criterion_metric_oracle, 1.0},
      {2, "hand-checked-metric-values", criterion_hand_metrics, 0.0},
      {3, "tdoa-delay-recovery", criterion_delay_recovery, 30.0},
      {4, "dominant-frequency-accuracy", criterion_domfreq, 10.0},
      {5, "shape-conformance", criterion_shapes, 0.0},
      {6, "gradient-verification", criterion_gradients, 120.0},
      {7, "synthetic-end-to-end", criterion_end_to_end, 2700.0},
      {8, "volume-vs-concat", criterion_volume_vs_concat, 0.0},
      {9, "determinism", criterion_determinism, 0.0},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    CriterionResult result;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(result);
    } catch (const std::exception& e) {
      result.require(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0.0 && seconds >= c.budget_seconds) {
      result.require(false, "runtime " + std::to_string(seconds) + " s exceeds " +
                                std::to_string(c.budget_seconds) + " s");
    }
    std::printf("[%s] %d %s (%.1f s)%s%s\n", result.pass ? "PASS" : "FAIL", c.id, c.name,
                seconds, result.detail.str().empty() ? "" : ": ",
                result.detail.str().c_str());
    std::fflush(stdout);
    if (!result.pass) ++failures;
  }

  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
