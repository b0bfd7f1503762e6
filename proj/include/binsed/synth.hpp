// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "binsed/audio_io.hpp"

namespace binsed {

/// One synthetic event class: band-limited tone mixtures with a fixed
/// interchannel delay in samples (positive = channel 1 leads).
struct SynthClassSpec {
  std::string label;
  double f_low = 300.0;
  double f_high = 1200.0;
  int delay = 0;
};

struct SynthSpec {
  int recordings = 20;
  double duration = 30.0;  // seconds per recording
  int sample_rate = 44100;
  int folds = 5;
  std::vector<std::string> contexts{"siteA", "siteB"};
  std::vector<SynthClassSpec> classes{
      {"alarm", 300.0, 1200.0, 8},
      {"siren", 1800.0, 4500.0, -8},
  };
  double mean_gap = 2.5;        // seconds between events of one class
  double event_min = 0.8;       // event duration bounds, seconds
  double event_max = 2.5;
  double gain_low = 0.2;
  double gain_high = 0.45;
  double noise_level = 0.004;   // per-channel uncorrelated background
  double density = 1.0;         // scales the event rate; 0 = silent corpus
  int tones_per_event = 24;
  std::uint64_t seed = 1;
};

/// Writes audio/recNNN.wav, ann/recNNN.txt and manifest.tsv under out_dir.
/// Recordings alternate contexts and cycle folds 1..folds; the corpus is a
/// pure function of the spec (byte-identical for equal seeds).
void generate_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Stereo white noise with channel 2 delayed by `delay` samples (channel 1
/// leads for positive delays).
AudioClip make_delayed_noise_clip(double seconds, int sample_rate, int delay,
                                  std::uint64_t seed);

/// Equal-amplitude sine in every channel.
AudioClip make_tone_clip(double freq_hz, double seconds, int sample_rate, double amplitude,
                         int channels);

}  // namespace binsed
