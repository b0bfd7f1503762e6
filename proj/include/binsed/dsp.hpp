// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <span>
#include <vector>

#include "binsed/audio_io.hpp"
#include "binsed/volume.hpp"

namespace binsed {

/// Short-time analysis configuration shared by every feature extractor.
/// All extractors emit frames on the same hop grid, so a clip produces the
/// same frame count T everywhere.
struct DspConfig {
  int sample_rate = 44100;
  double hop_seconds = 0.02;
  double mel_window_seconds = 0.04;
  int mel_bands = 40;
  double mel_f_low = 0.0;
  double mel_f_high = 0.0;  // 0 selects Nyquist
  bool power_spectrum = true;  // squared magnitude before mel integration
  double log_floor = 1e-10;

  int hop_samples() const;
  int window_samples(double seconds) const;
};

/// Frame t covers samples [t*hop - window/2, t*hop + window/2), zero-padded
/// beyond the signal edges. frame_count = ceil(len / hop).
struct FramingPlan {
  int hop = 0;     // samples
  int window = 0;  // samples

  FramingPlan(int hop_samples, int window_samples);
  std::size_t frame_count(std::size_t signal_length) const;
  /// First/last frame index whose window lies fully inside the signal.
  std::pair<std::int64_t, std::int64_t> interior_frames(std::size_t signal_length) const;
};

/// One-sided spectrum of a single analysis frame: bins 0..N/2.
struct StftFrame {
  std::vector<std::complex<double>> coefficients;
  int frame_index = 0;
  int fft_size = 0;
};

std::vector<double> hamming_window(int length);
int next_pow2(int n);

/// Copies the (unwindowed) samples of frame t into `out` (out.size() is the
/// window length), zero-padding beyond the signal edges.
void extract_frame(std::span<const float> signal, const FramingPlan& plan, std::int64_t t,
                   std::span<double> out);

/// All Hamming-windowed frames of a signal.
std::vector<std::vector<double>> frame_signal(std::span<const float> signal,
                                              const FramingPlan& plan);

/// Iterative radix-2 complex FFT with cached twiddles. Sizes must be powers
/// of two.
class Fft {
 public:
  explicit Fft(int n);
  int size() const { return n_; }

  /// In-place transform of interleaved re/im arrays of length n.
  void transform(std::span<double> re, std::span<double> im) const;

  /// One-sided spectrum of a real frame (zero-padded to n).
  StftFrame real_forward(std::span<const double> frame, int frame_index) const;

 private:
  int n_ = 0;
  int log2n_ = 0;
  std::vector<int> bitrev_;
  std::vector<double> cos_, sin_;
};

enum class FilterShape { triangular, rectangular };

/// Mel-spaced filterbank over one-sided FFT bins. Triangular banks are
/// unit-peak and overlapping; rectangular banks partition the range into
/// disjoint bands (each bin belongs to exactly one band).
struct MelFilterbank {
  int fft_size = 0;
  int sample_rate = 0;
  FilterShape shape = FilterShape::triangular;
  std::vector<std::vector<double>> weights;       // bands x (N/2+1)
  std::vector<std::pair<int, int>> bin_range;     // [first, last] nonzero bin per band
  std::vector<std::pair<double, double>> edges_hz;

  int bands() const { return static_cast<int>(weights.size()); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

MelFilterbank build_mel_filterbank(int bands, int fft_size, int sample_rate, double f_low,
                                   double f_high, FilterShape shape);

/// Binaural (or monaural) log mel-band energies: T x mel_bands x channels.
FeatureVolume log_mel_energies(const AudioClip& clip, const DspConfig& cfg);

/// Channel-averaged variant: T x mel_bands x 1.
FeatureVolume log_mel_energies_downmix(const AudioClip& clip, const DspConfig& cfg);

}  // namespace binsed
