// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "binsed/common.hpp"

namespace binsed {

/// Wire codes are part of the volume file format; do not renumber.
enum class FeatureType : std::uint16_t {
  mel = 0,
  tdoa = 1,
  gcc = 2,
  domfreq = 3,
  acr = 4,
};

const char* feature_type_name(FeatureType t);

/// Rank-3 feature array, frames x feature-length x layers, frame-major with
/// the layer index fastest.
struct FeatureVolume {
  int frames = 0;  // T
  int length = 0;  // L
  int layers = 0;  // C
  FeatureType type = FeatureType::mel;
  double hop = 0.02;  // seconds
  std::vector<float> data;

  FeatureVolume() = default;
  FeatureVolume(int t, int l, int c, FeatureType ft, double hop_seconds)
      : frames(t), length(l), layers(c), type(ft), hop(hop_seconds),
        data(static_cast<std::size_t>(t) * l * c, 0.0f) {
    if (t <= 0 || l <= 0 || c <= 0) throw ValidationError("volume dimensions must be positive");
  }

  float& at(int t, int l, int c) {
    return data[(static_cast<std::size_t>(t) * length + l) * layers + c];
  }
  float at(int t, int l, int c) const {
    return data[(static_cast<std::size_t>(t) * length + l) * layers + c];
  }
  std::size_t cells() const { return data.size(); }
};

/// Dense frames x columns matrix (the concatenated arrangement).
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  FeatureMatrix() = default;
  FeatureMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0f) {}
  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// Layers per-channel matrices into a volume: out[t][l][c] = mats[c][t][l].
FeatureVolume stack_channels(const std::vector<FeatureMatrix>& mats, FeatureType type, double hop);

/// Channel-major concatenation: out[t] = mats[0][t] || mats[1][t] || ...
FeatureMatrix concat_channels(const std::vector<FeatureMatrix>& mats);

/// The volume-to-matrix rearrangement used by the concatenated input mode;
/// column c*L+l holds volume cell (l, c).
FeatureMatrix volume_to_concat(const FeatureVolume& v);

/// Per-cell z-scoring statistics, fitted on training frames only.
struct NormStats {
  FeatureType type = FeatureType::mel;
  int length = 0;
  int layers = 0;
  std::vector<float> mean;    // length x layers
  std::vector<float> stddev;  // floored at 1e-8

  std::size_t cells() const { return mean.size(); }
};

NormStats fit_normalizer(const std::vector<const FeatureVolume*>& volumes);
FeatureVolume apply_normalizer(const FeatureVolume& v, const NormStats& stats);
FeatureVolume invert_normalizer(const FeatureVolume& v, const NormStats& stats);

void write_volume(const std::filesystem::path& path, const FeatureVolume& v);
FeatureVolume read_volume(const std::filesystem::path& path);

}  // namespace binsed
