// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "binsed/volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace binsed {

static_assert(std::endian::native == std::endian::little,
              "volume serialization assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'S', 'E', 'D', 'F'};
constexpr std::uint16_t kVersion = 1;
constexpr float kStdFloor = 1e-8f;
}  // namespace

const char* feature_type_name(FeatureType t) {
  switch (t) {
    case FeatureType::mel: return "mel";
    case FeatureType::tdoa: return "tdoa";
    case FeatureType::gcc: return "gcc";
    case FeatureType::domfreq: return "domfreq";
    case FeatureType::acr: return "acr";
  }
  return "unknown";
}

FeatureVolume stack_channels(const std::vector<FeatureMatrix>& mats, FeatureType type,
                             double hop) {
  if (mats.empty()) throw ValidationError("stack_channels: no input matrices");
  for (const auto& m : mats) {
    if (m.rows != mats[0].rows || m.cols != mats[0].cols) {
      throw ValidationError("stack_channels: input matrices differ in shape");
    }
  }
  FeatureVolume v(mats[0].rows, mats[0].cols, static_cast<int>(mats.size()), type, hop);
  for (int c = 0; c < v.layers; ++c) {
    for (int t = 0; t < v.frames; ++t) {
      for (int l = 0; l < v.length; ++l) v.at(t, l, c) = mats[c].at(t, l);
    }
  }
  return v;
}

FeatureMatrix concat_channels(const std::vector<FeatureMatrix>& mats) {
  if (mats.empty()) throw ValidationError("concat_channels: no input matrices");
  for (const auto& m : mats) {
    if (m.rows != mats[0].rows || m.cols != mats[0].cols) {
      throw ValidationError("concat_channels: input matrices differ in shape");
    }
  }
  const int rows = mats[0].rows;
  const int cols = mats[0].cols;
  FeatureMatrix out(rows, cols * static_cast<int>(mats.size()));
  for (std::size_t c = 0; c < mats.size(); ++c) {
    for (int t = 0; t < rows; ++t) {
      for (int l = 0; l < cols; ++l) out.at(t, static_cast<int>(c) * cols + l) = mats[c].at(t, l);
    }
  }
  return out;
}

FeatureMatrix volume_to_concat(const FeatureVolume& v) {
  FeatureMatrix out(v.frames, v.length * v.layers);
  for (int t = 0; t < v.frames; ++t) {
    for (int c = 0; c < v.layers; ++c) {
      for (int l = 0; l < v.length; ++l) out.at(t, c * v.length + l) = v.at(t, l, c);
    }
  }
  return out;
}

NormStats fit_normalizer(const std::vector<const FeatureVolume*>& volumes) {
  if (volumes.empty()) throw ValidationError("fit_normalizer: empty training set");
  const auto* first = volumes.front();
  std::int64_t total_frames = 0;
  for (const auto* v : volumes) {
    if (v->type != first->type || v->length != first->length || v->layers != first->layers) {
      throw ValidationError("fit_normalizer: volumes disagree in type or shape");
    }
    total_frames += v->frames;
  }
  if (total_frames < 2) throw ValidationError("fit_normalizer: need at least 2 frames");

  const std::size_t cells = static_cast<std::size_t>(first->length) * first->layers;
  std::vector<double> sum(cells, 0.0), sumsq(cells, 0.0);
  for (const auto* v : volumes) {
    for (int t = 0; t < v->frames; ++t) {
      const float* row = v->data.data() + static_cast<std::size_t>(t) * cells;
      for (std::size_t i = 0; i < cells; ++i) {
        const double x = row[i];
        sum[i] += x;
        sumsq[i] += x * x;
      }
    }
  }

  NormStats stats;
  stats.type = first->type;
  stats.length = first->length;
  stats.layers = first->layers;
  stats.mean.resize(cells);
  stats.stddev.resize(cells);
  const double n = static_cast<double>(total_frames);
  for (std::size_t i = 0; i < cells; ++i) {
    const double mean = sum[i] / n;
    const double var = std::max(sumsq[i] / n - mean * mean, 0.0);
    stats.mean[i] = static_cast<float>(mean);
    stats.stddev[i] = std::max(static_cast<float>(std::sqrt(var)), kStdFloor);
  }
  return stats;
}

FeatureVolume apply_normalizer(const FeatureVolume& v, const NormStats& stats) {
  if (v.type != stats.type || v.length != stats.length || v.layers != stats.layers) {
    throw ValidationError("apply_normalizer: stats do not match the volume shape");
  }
  FeatureVolume out = v;
  const std::size_t cells = stats.cells();
  for (int t = 0; t < v.frames; ++t) {
    float* row = out.data.data() + static_cast<std::size_t>(t) * cells;
    for (std::size_t i = 0; i < cells; ++i) row[i] = (row[i] - stats.mean[i]) / stats.stddev[i];
  }
  return out;
}

FeatureVolume invert_normalizer(const FeatureVolume& v, const NormStats& stats) {
  if (v.type != stats.type || v.length != stats.length || v.layers != stats.layers) {
    throw ValidationError("invert_normalizer: stats do not match the volume shape");
  }
  FeatureVolume out = v;
  const std::size_t cells = stats.cells();
  for (int t = 0; t < v.frames; ++t) {
    float* row = out.data.data() + static_cast<std::size_t>(t) * cells;
    for (std::size_t i = 0; i < cells; ++i) row[i] = row[i] * stats.stddev[i] + stats.mean[i];
  }
  return out;
}

namespace {

template <class T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError(path.string() + ": truncated volume file");
  }
  return v;
}

}  // namespace

void write_volume(const std::filesystem::path& path, const FeatureVolume& v) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint16_t>(v.type));
  write_pod(out, static_cast<std::uint32_t>(v.frames));
  write_pod(out, static_cast<std::uint32_t>(v.length));
  write_pod(out, static_cast<std::uint32_t>(v.layers));
  write_pod(out, static_cast<std::uint32_t>(std::lround(v.hop * 1e6)));
  out.write(reinterpret_cast<const char*>(v.data.data()),
            static_cast<std::streamsize>(v.data.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureVolume read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open volume file: " + path.string());

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic, not a feature volume file");
  }
  const auto version = read_pod<std::uint16_t>(in, path);
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported volume version " + std::to_string(version));
  }
  const auto type = read_pod<std::uint16_t>(in, path);
  if (type > 4) throw FormatError(path.string() + ": unknown feature type code");
  const auto t = read_pod<std::uint32_t>(in, path);
  const auto l = read_pod<std::uint32_t>(in, path);
  const auto c = read_pod<std::uint32_t>(in, path);
  const auto hop_us = read_pod<std::uint32_t>(in, path);
  if (t == 0 || l == 0 || c == 0) {
    throw FormatError(path.string() + ": zero dimension in volume header");
  }

  FeatureVolume v(static_cast<int>(t), static_cast<int>(l), static_cast<int>(c),
                  static_cast<FeatureType>(type), hop_us * 1e-6);
  if (!in.read(reinterpret_cast<char*>(v.data.data()),
               static_cast<std::streamsize>(v.data.size() * sizeof(float)))) {
    throw IoError(path.string() + ": payload shorter than the declared " +
                  std::to_string(v.data.size()) + " cells");
  }
  return v;
}

}  // namespace binsed
