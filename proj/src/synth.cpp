// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "binsed/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace binsed {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct PlacedEvent {
  double onset = 0.0;
  double offset = 0.0;
  int class_index = 0;
};

std::vector<double> render_event_waveform(const SynthClassSpec& cls, int samples, int rate,
                                          int tones, Rng& rng) {
  std::vector<double> freqs(tones), phases(tones);
  for (int i = 0; i < tones; ++i) {
    freqs[i] = rng.uniform(cls.f_low, cls.f_high);
    phases[i] = rng.uniform(0.0, 2.0 * kPi);
  }
  std::vector<double> s(samples, 0.0);
  for (int i = 0; i < tones; ++i) {
    const double w = 2.0 * kPi * freqs[i] / rate;
    for (int n = 0; n < samples; ++n) s[n] += std::sin(w * n + phases[i]);
  }
  double peak = 0.0;
  for (double v : s) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : s) v /= peak;
  }
  // 10 ms cosine attack/release to avoid clicks.
  const int ramp = std::min(samples / 2, rate / 100);
  for (int n = 0; n < ramp; ++n) {
    const double g = 0.5 * (1.0 - std::cos(kPi * n / ramp));
    s[n] *= g;
    s[samples - 1 - n] *= g;
  }
  return s;
}

}  // namespace

void generate_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.recordings < 1) throw ValidationError("synth: need at least one recording");
  if (spec.classes.empty()) throw ValidationError("synth: need at least one class");
  if (spec.contexts.empty()) throw ValidationError("synth: need at least one context");
  if (spec.folds < 1) throw ValidationError("synth: need at least one fold");
  if (spec.duration <= 0.0) throw ValidationError("synth: duration must be positive");

  std::filesystem::create_directories(out_dir / "audio");
  std::filesystem::create_directories(out_dir / "ann");

  const Rng base(spec.seed);
  std::ofstream manifest(out_dir / "manifest.tsv", std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest in " + out_dir.string());

  const auto total = static_cast<std::size_t>(spec.duration * spec.sample_rate);

  for (int r = 0; r < spec.recordings; ++r) {
    Rng rng = base.fork(static_cast<std::uint64_t>(r) + 1);

    AudioClip clip;
    clip.sample_rate = spec.sample_rate;
    clip.samples.assign(2, std::vector<float>(total, 0.0f));

    std::vector<double> mix[2];
    mix[0].assign(total, 0.0);
    mix[1].assign(total, 0.0);
    for (int c = 0; c < 2; ++c) {
      for (std::size_t n = 0; n < total; ++n) mix[c][n] = rng.normal() * spec.noise_level;
    }

    std::vector<PlacedEvent> events;
    for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
      const auto& cls = spec.classes[ci];
      if (spec.density <= 0.0) break;
      const double gap_scale = spec.mean_gap / spec.density;
      double t = -gap_scale * std::log(1.0 - rng.uniform());
      while (true) {
        const double dur = rng.uniform(spec.event_min, spec.event_max);
        if (t + dur >= spec.duration) break;
        const double gain = rng.uniform(spec.gain_low, spec.gain_high);
        const auto dur_n = static_cast<int>(dur * spec.sample_rate);
        const auto start_n = static_cast<std::int64_t>(t * spec.sample_rate);
        const auto wave = render_event_waveform(cls, dur_n, spec.sample_rate,
                                                spec.tones_per_event, rng);
        for (int n = 0; n < dur_n; ++n) {
          const double v = gain * wave[n];
          const std::int64_t i1 = start_n + n;
          const std::int64_t i2 = i1 + cls.delay;  // channel 2 lags when delay > 0
          if (i1 >= 0 && i1 < static_cast<std::int64_t>(total)) mix[0][i1] += v;
          if (i2 >= 0 && i2 < static_cast<std::int64_t>(total)) mix[1][i2] += v;
        }
        events.push_back({t, t + dur, static_cast<int>(ci)});
        t += dur + (-gap_scale * std::log(1.0 - rng.uniform()));
      }
    }

    std::sort(events.begin(), events.end(), [](const PlacedEvent& a, const PlacedEvent& b) {
      if (a.onset != b.onset) return a.onset < b.onset;
      return a.class_index < b.class_index;
    });

    for (int c = 0; c < 2; ++c) {
      for (std::size_t n = 0; n < total; ++n) {
        clip.samples[c][n] = static_cast<float>(std::clamp(mix[c][n], -1.0, 1.0));
      }
    }

    char name[32];
    std::snprintf(name, sizeof(name), "rec%03d", r);
    const std::string audio_rel = std::string("audio/") + name + ".wav";
    const std::string ann_rel = std::string("ann/") + name + ".txt";
    write_wav(out_dir / audio_rel, clip);

    std::vector<EventAnnotation> ann;
    for (const auto& ev : events) {
      ann.push_back({ev.onset, ev.offset, spec.classes[ev.class_index].label});
    }
    write_annotations(out_dir / ann_rel, ann);

    const std::string context = spec.contexts[r % spec.contexts.size()];
    const int fold = r % spec.folds + 1;
    manifest << audio_rel << '\t' << ann_rel << '\t' << context << '\t' << fold << '\n';
  }
  if (!manifest) throw IoError("manifest write failed in " + out_dir.string());
}

AudioClip make_delayed_noise_clip(double seconds, int sample_rate, int delay,
                                  std::uint64_t seed) {
  const auto total = static_cast<std::size_t>(seconds * sample_rate);
  Rng rng(seed);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.id = "noise-delay-" + std::to_string(delay);
  clip.samples.assign(2, std::vector<float>(total, 0.0f));
  std::vector<double> src(total, 0.0);
  for (std::size_t n = 0; n < total; ++n) src[n] = rng.uniform(-0.5, 0.5);
  for (std::size_t n = 0; n < total; ++n) {
    clip.samples[0][n] = static_cast<float>(src[n]);
    const auto j = static_cast<std::int64_t>(n) + delay;
    if (j >= 0 && j < static_cast<std::int64_t>(total)) {
      clip.samples[1][static_cast<std::size_t>(j)] = static_cast<float>(src[n]);
    }
  }
  return clip;
}

AudioClip make_tone_clip(double freq_hz, double seconds, int sample_rate, double amplitude,
                         int channels) {
  const auto total = static_cast<std::size_t>(seconds * sample_rate);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.id = "tone-" + std::to_string(freq_hz);
  clip.samples.assign(channels, std::vector<float>(total, 0.0f));
  for (std::size_t n = 0; n < total; ++n) {
    const double v = amplitude * std::sin(2.0 * kPi * freq_hz * static_cast<double>(n) / sample_rate);
    for (int c = 0; c < channels; ++c) clip.samples[c][n] = static_cast<float>(v);
  }
  return clip;
}

}  // namespace binsed
