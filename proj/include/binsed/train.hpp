// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binsed/metrics.hpp"
#include "binsed/model.hpp"

namespace binsed {

struct TrainConfig {
  int sequence_length = 100;  // frames (2 s at the 20 ms hop)
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout = 0.5;
  int max_epochs = 200;
  int patience = 50;               // epochs without F improvement before stopping
  double min_improvement = 1e-4;   // absolute F
  double threshold = 0.5;
  double segment_length = 1.0;     // seconds, validation scoring
  std::uint64_t seed = 1;

  void validate() const;
};

/// Adam with bias correction; moment buffers match the flat parameter vector.
template <class Real>
struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Real> m, v;

  explicit Adam(std::size_t n, const TrainConfig& cfg)
      : lr(cfg.learning_rate), beta1(cfg.beta1), beta2(cfg.beta2), eps(cfg.epsilon),
        m(n, Real(0)), v(n, Real(0)) {}
  Adam(std::size_t n) : m(n, Real(0)), v(n, Real(0)) {}

  void update(std::vector<Real>& params, const std::vector<Real>& grads) {
    if (params.size() != m.size() || grads.size() != m.size()) {
      throw ValidationError("adam: buffer size mismatch");
    }
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    parallel_for(static_cast<std::int64_t>(params.size()), [&](std::int64_t i) {
      const double g = static_cast<double>(grads[i]);
      const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
      const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
      m[i] = static_cast<Real>(mi);
      v[i] = static_cast<Real>(vi);
      params[i] -= static_cast<Real>(lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
    });
  }
};

/// One recording's ready-to-train material: normalized feature volumes in
/// model branch order plus the frame-aligned target roll.
struct RecordingData {
  std::string id;
  std::string context;
  int fold = 0;
  std::vector<FeatureVolume> volumes;
  EventRoll targets;

  int frames() const { return volumes.empty() ? 0 : volumes[0].frames; }
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_f = 0.0;
  double val_er = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_f = 0.0;
};

/// Copies a [start, start+len) frame window of a volume into a branch input
/// tensor, applying the concat rearrangement when the branch expects it and
/// zero-padding past the end of the recording.
Ten3<float> slice_branch_input(const FeatureVolume& v, const BranchSpec& spec, int start,
                               int len);

/// Trains in place: sequences are non-overlapping windows that never span
/// recordings, reshuffled every epoch; after each epoch the model is scored
/// on the validation set and the best-F parameters are kept (and restored
/// into `model` on return).
TrainResult train_model(Model<float>& model, const std::vector<RecordingData>& train_set,
                        const std::vector<RecordingData>& val_set,
                        const std::vector<std::string>& contexts, const TrainConfig& cfg);

/// Frame probabilities for a full recording, processed in stateless
/// `chunk_frames` windows (the final short window is zero-padded and the
/// output truncated).
Mat<float> predict_probs(const Model<float>& model, const std::vector<FeatureVolume>& volumes,
                         int chunk_frames = 100);

/// Thresholded predictions (strictly greater than `threshold`).
EventRoll predict_roll(const Model<float>& model, const std::vector<FeatureVolume>& volumes,
                       const std::vector<std::string>& class_list, double threshold,
                       int chunk_frames = 100);

std::string format_history(const std::vector<EpochRecord>& history);

}  // namespace binsed
