// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "binsed/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace binsed {

void TrainConfig::validate() const {
  if (sequence_length < 1 || batch_size < 1) {
    throw ValidationError("train: sequence length and batch size must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("train: dropout must be in [0,1)");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("train: threshold must be in (0,1)");
  }
  if (max_epochs < 1) throw ValidationError("train: max_epochs must be >= 1");
  if (patience < 1) throw ValidationError("train: patience must be >= 1");
  if (learning_rate <= 0.0) throw ValidationError("train: learning rate must be > 0");
}

Ten3<float> slice_branch_input(const FeatureVolume& v, const BranchSpec& spec, int start,
                               int len) {
  Ten3<float> out(len, spec.input_length, spec.input_layers);
  const bool direct = v.length == spec.input_length && v.layers == spec.input_layers;
  const bool concat = !direct && spec.input_layers == 1 &&
                      spec.input_length == v.length * v.layers;
  if (!direct && !concat) {
    throw ValidationError("volume shape " + std::to_string(v.length) + "x" +
                          std::to_string(v.layers) + " does not fit branch '" + spec.feature +
                          "'");
  }
  const int avail = std::min(len, v.frames - start);
  for (int t = 0; t < avail; ++t) {
    if (direct) {
      const float* src = v.data.data() + static_cast<std::size_t>(start + t) * v.length * v.layers;
      std::copy(src, src + static_cast<std::size_t>(v.length) * v.layers, out.row(t, 0));
    } else {
      for (int c = 0; c < v.layers; ++c) {
        for (int l = 0; l < v.length; ++l) {
          out.at(t, c * v.length + l, 0) = v.at(start + t, l, c);
        }
      }
    }
  }
  return out;
}

namespace {

struct SequenceId {
  int recording = 0;
  int start = 0;
};

void check_recording(const RecordingData& rec, const ModelConfig& config) {
  if (rec.volumes.size() != config.branches.size()) {
    throw ValidationError("recording '" + rec.id + "': expected " +
                          std::to_string(config.branches.size()) + " feature volumes, got " +
                          std::to_string(rec.volumes.size()));
  }
  for (const auto& v : rec.volumes) {
    if (v.frames != rec.frames()) {
      throw ValidationError("recording '" + rec.id + "': feature volumes disagree on frame count");
    }
  }
  if (static_cast<int>(rec.targets.frames) != rec.frames()) {
    throw ValidationError("recording '" + rec.id + "': target roll does not match feature frames");
  }
}

SequenceBatchItem<float> make_item(const RecordingData& rec, const ModelConfig& config, int start,
                                   int len) {
  SequenceBatchItem<float> item;
  for (std::size_t b = 0; b < config.branches.size(); ++b) {
    item.branch_inputs.push_back(slice_branch_input(rec.volumes[b], config.branches[b], start, len));
  }
  const int K = config.classes();
  item.targets = Mat<float>(len, K);
  item.frame_mask.assign(len, 0);
  const int avail = std::min(len, rec.frames() - start);
  for (int t = 0; t < avail; ++t) {
    item.frame_mask[t] = 1;
    for (int k = 0; k < K; ++k) {
      item.targets.at(t, k) = static_cast<float>(rec.targets.at(start + t, k));
    }
  }
  return item;
}

double validate_model(const Model<float>& model, const std::vector<RecordingData>& val_set,
                      const std::vector<std::string>& contexts, const TrainConfig& cfg,
                      double* er_out) {
  std::vector<ScoredRecording> scored;
  for (const auto& rec : val_set) {
    ScoredRecording s;
    s.id = rec.id;
    s.context = rec.context;
    s.reference = rec.targets;
    s.system = predict_roll(model, rec.volumes, model.config.class_list, cfg.threshold,
                            cfg.sequence_length);
    scored.push_back(std::move(s));
  }
  const auto report = evaluate_by_context(scored, contexts, cfg.segment_length);
  if (er_out) *er_out = report.overall_er;
  return report.overall_f;
}

}  // namespace

TrainResult train_model(Model<float>& model, const std::vector<RecordingData>& train_set,
                        const std::vector<RecordingData>& val_set,
                        const std::vector<std::string>& contexts, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("train: empty training set");
  if (val_set.empty()) throw ValidationError("train: empty validation set");
  for (const auto& rec : train_set) check_recording(rec, model.config);
  for (const auto& rec : val_set) check_recording(rec, model.config);

  std::vector<SequenceId> sequences;
  for (std::size_t r = 0; r < train_set.size(); ++r) {
    const int T = train_set[r].frames();
    for (int start = 0; start < T; start += cfg.sequence_length) {
      sequences.push_back({static_cast<int>(r), start});
    }
  }
  if (sequences.empty()) throw ValidationError("train: no sequences in the training set");

  Rng rng(cfg.seed);
  Adam<float> adam(model.params.data.size(), cfg);
  std::vector<float> grads(model.params.data.size(), 0.0f);
  ForwardCache<float> cache;

  TrainResult result;
  std::vector<float> best_params = model.params.data;
  std::vector<float> best_state = model.state.data;
  double best_f = -1.0;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(sequences);
    double loss_sum = 0.0;
    std::int64_t loss_batches = 0;

    for (std::size_t pos = 0; pos < sequences.size(); pos += cfg.batch_size) {
      const std::size_t take = std::min<std::size_t>(cfg.batch_size, sequences.size() - pos);
      std::vector<SequenceBatchItem<float>> batch;
      batch.reserve(take);
      for (std::size_t i = 0; i < take; ++i) {
        const auto& sid = sequences[pos + i];
        batch.push_back(
            make_item(train_set[sid.recording], model.config, sid.start, cfg.sequence_length));
      }
      forward_train(model, batch, static_cast<float>(cfg.dropout), rng, cache, true);
      loss_sum += batch_loss(cache, batch);
      ++loss_batches;
      backward(model, batch, cache, grads);
      adam.update(model.params.data, grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(loss_batches);
    rec.val_f = validate_model(model, val_set, contexts, cfg, &rec.val_er);
    result.history.push_back(rec);

    if (rec.val_f >= best_f + cfg.min_improvement || best_epoch == 0) {
      best_f = rec.val_f;
      best_epoch = epoch;
      best_params = model.params.data;
      best_state = model.state.data;
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }

  model.params.data = std::move(best_params);
  model.state.data = std::move(best_state);
  result.best_epoch = best_epoch;
  result.best_f = best_f;
  return result;
}

Mat<float> predict_probs(const Model<float>& model, const std::vector<FeatureVolume>& volumes,
                         int chunk_frames) {
  if (volumes.size() != model.config.branches.size()) {
    throw ValidationError("predict: expected " + std::to_string(model.config.branches.size()) +
                          " feature volumes, got " + std::to_string(volumes.size()));
  }
  const int T = volumes[0].frames;
  for (const auto& v : volumes) {
    if (v.frames != T) throw ValidationError("predict: feature volumes disagree on frame count");
  }
  const int K = model.config.classes();
  Mat<float> probs(T, K);
  for (int start = 0; start < T; start += chunk_frames) {
    const int len = chunk_frames;
    std::vector<Ten3<float>> inputs;
    for (std::size_t b = 0; b < volumes.size(); ++b) {
      inputs.push_back(slice_branch_input(volumes[b], model.config.branches[b], start, len));
    }
    const Mat<float> chunk = forward_infer(model, inputs);
    const int copy = std::min(chunk_frames, T - start);
    for (int t = 0; t < copy; ++t) {
      std::copy(chunk.row(t), chunk.row(t) + K, probs.row(start + t));
    }
  }
  return probs;
}

EventRoll predict_roll(const Model<float>& model, const std::vector<FeatureVolume>& volumes,
                       const std::vector<std::string>& class_list, double threshold,
                       int chunk_frames) {
  const Mat<float> probs = predict_probs(model, volumes, chunk_frames);
  EventRoll roll;
  roll.frames = static_cast<std::size_t>(probs.rows);
  roll.hop = volumes.empty() ? 0.02 : volumes[0].hop;
  roll.class_list = class_list;
  roll.values.assign(roll.frames * class_list.size(), 0);
  for (int t = 0; t < probs.rows; ++t) {
    for (int k = 0; k < probs.cols; ++k) {
      if (static_cast<double>(probs.at(t, k)) > threshold) {
        roll.set(static_cast<std::size_t>(t), static_cast<std::size_t>(k), 1);
      }
    }
  }
  return roll;
}

std::string format_history(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch\ttrain_loss\tval_F\tval_ER\n";
  for (const auto& r : history) {
    out << r.epoch << '\t' << format_double(r.train_loss, 6) << '\t'
        << format_double(r.val_f, 6) << '\t' << format_double(r.val_er, 6) << '\n';
  }
  return out.str();
}

}  // namespace binsed
