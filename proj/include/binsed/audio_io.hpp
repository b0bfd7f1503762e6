// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "binsed/common.hpp"

namespace binsed {

/// Multichannel sample buffer. Samples are amplitudes in [-1, 1]; all
/// channels have equal length.
struct AudioClip {
  std::vector<std::vector<float>> samples;  // [channel][frame]
  int sample_rate = 0;
  std::string id;

  int channels() const { return static_cast<int>(samples.size()); }
  std::size_t length() const { return samples.empty() ? 0 : samples[0].size(); }
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(length()) / sample_rate : 0.0;
  }
  void validate() const;
};

struct EventAnnotation {
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds, > onset
  std::string label;
};

struct ManifestEntry {
  std::string audio_path;       // relative to the manifest root
  std::string annotation_path;  // relative to the manifest root
  std::string context;
  int fold = 0;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_list;  // sorted union of annotation labels
  std::vector<std::string> contexts;    // sorted unique
  int fold_count = 0;

  std::filesystem::path audio_file(const ManifestEntry& e) const { return root / e.audio_path; }
  std::filesystem::path annotation_file(const ManifestEntry& e) const {
    return root / e.annotation_path;
  }
};

/// Binary frame-by-class activity matrix at a fixed hop.
struct EventRoll {
  std::size_t frames = 0;
  double hop = 0.02;  // seconds
  std::vector<std::string> class_list;
  std::vector<std::uint8_t> values;  // frames x classes, frame-major

  std::size_t classes() const { return class_list.size(); }
  std::uint8_t at(std::size_t t, std::size_t k) const { return values[t * classes() + k]; }
  void set(std::size_t t, std::size_t k, std::uint8_t v) { values[t * classes() + k] = v; }
};

/// Reads a RIFF/WAVE file holding 16-bit PCM with 1 or 2 channels. Samples
/// are scaled by 1/32768. If expected_rate > 0, a differing file rate is
/// rejected (no resampling).
AudioClip read_wav(const std::filesystem::path& path, int expected_rate = 0);

/// PCM16 writer; the exact inverse of read_wav for amplitudes that are
/// multiples of 1/32768 (others are clamped and rounded).
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Parses "onset<TAB>offset<TAB>label" lines, decimal seconds. Blank lines
/// are skipped; anything else malformed is an error naming the line.
std::vector<EventAnnotation> parse_annotations(const std::filesystem::path& path);

void write_annotations(const std::filesystem::path& path,
                       const std::vector<EventAnnotation>& events);

/// Reads <root>/manifest.tsv ("audio<TAB>annotation<TAB>context<TAB>fold"
/// per line), checks that every referenced file exists, that audio paths are
/// unique and that folds form 1..F, then scans all annotations to build the
/// class list.
DatasetManifest build_manifest(const std::filesystem::path& root);

/// Frame t is active for class k iff [t*hop, (t+1)*hop) overlaps the
/// half-open event interval [onset, offset) of any event labelled k.
/// frames = ceil(duration / hop).
EventRoll annotations_to_roll(const std::vector<EventAnnotation>& events, double duration,
                              const std::vector<std::string>& class_list, double hop);

/// Same activity rule with the frame count given directly (used when the
/// frame count must match an existing feature matrix exactly).
EventRoll annotations_to_roll_frames(const std::vector<EventAnnotation>& events,
                                     std::size_t frames,
                                     const std::vector<std::string>& class_list, double hop);

/// Run-length extraction of active frames back into events; the inverse of
/// annotations_to_roll up to one hop of quantization.
std::vector<EventAnnotation> roll_to_events(const EventRoll& roll);

}  // namespace binsed
