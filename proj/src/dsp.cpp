// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "binsed/dsp.hpp"

#include <algorithm>
#include <cmath>

namespace binsed {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

int DspConfig::hop_samples() const {
  return static_cast<int>(std::lround(hop_seconds * sample_rate));
}

int DspConfig::window_samples(double seconds) const {
  return static_cast<int>(std::lround(seconds * sample_rate));
}

FramingPlan::FramingPlan(int hop_samples, int window_samples)
    : hop(hop_samples), window(window_samples) {
  if (hop <= 0) throw ValidationError("framing: hop must be > 0");
  if (window < hop) throw ValidationError("framing: window must be >= hop");
}

std::size_t FramingPlan::frame_count(std::size_t signal_length) const {
  return (signal_length + static_cast<std::size_t>(hop) - 1) / static_cast<std::size_t>(hop);
}

std::pair<std::int64_t, std::int64_t> FramingPlan::interior_frames(
    std::size_t signal_length) const {
  const std::int64_t half = window / 2;
  const std::int64_t first = (half + hop - 1) / hop;
  const std::int64_t last =
      (static_cast<std::int64_t>(signal_length) - (window - half)) / hop;
  return {first, last};
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(length, 1.0);
  if (length > 1) {
    for (int n = 0; n < length; ++n) {
      w[n] = 0.54 - 0.46 * std::cos(2.0 * kPi * n / (length - 1));
    }
  }
  return w;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

void extract_frame(std::span<const float> signal, const FramingPlan& plan, std::int64_t t,
                   std::span<double> out) {
  const auto window = static_cast<std::int64_t>(out.size());
  const std::int64_t start = t * plan.hop - plan.window / 2;
  const auto len = static_cast<std::int64_t>(signal.size());
  for (std::int64_t n = 0; n < window; ++n) {
    const std::int64_t idx = start + n;
    out[static_cast<std::size_t>(n)] =
        (idx >= 0 && idx < len) ? static_cast<double>(signal[static_cast<std::size_t>(idx)]) : 0.0;
  }
}

std::vector<std::vector<double>> frame_signal(std::span<const float> signal,
                                              const FramingPlan& plan) {
  if (signal.empty()) throw ValidationError("frame_signal: empty signal");
  const auto frames = plan.frame_count(signal.size());
  const auto win = hamming_window(plan.window);
  std::vector<std::vector<double>> out(frames, std::vector<double>(plan.window));
  for (std::size_t t = 0; t < frames; ++t) {
    extract_frame(signal, plan, static_cast<std::int64_t>(t), out[t]);
    for (int n = 0; n < plan.window; ++n) out[t][n] *= win[n];
  }
  return out;
}

Fft::Fft(int n) : n_(n) {
  if (n < 2 || (n & (n - 1)) != 0) {
    throw ValidationError("fft size must be a power of two >= 2, got " + std::to_string(n));
  }
  log2n_ = 0;
  while ((1 << log2n_) < n) ++log2n_;

  bitrev_.resize(n);
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < log2n_; ++b) r |= ((i >> b) & 1) << (log2n_ - 1 - b);
    bitrev_[i] = r;
  }
  cos_.resize(n / 2);
  sin_.resize(n / 2);
  for (int k = 0; k < n / 2; ++k) {
    cos_[k] = std::cos(-2.0 * kPi * k / n);
    sin_[k] = std::sin(-2.0 * kPi * k / n);
  }
}

void Fft::transform(std::span<double> re, std::span<double> im) const {
  const int n = n_;
  for (int i = 0; i < n; ++i) {
    const int j = bitrev_[i];
    if (j > i) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len >> 1;
    const int stride = n / len;
    for (int base = 0; base < n; base += len) {
      for (int j = 0; j < half; ++j) {
        const double wr = cos_[j * stride];
        const double wi = sin_[j * stride];
        const int a = base + j;
        const int b = a + half;
        const double tr = re[b] * wr - im[b] * wi;
        const double ti = re[b] * wi + im[b] * wr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
      }
    }
  }
}

StftFrame Fft::real_forward(std::span<const double> frame, int frame_index) const {
  if (static_cast<int>(frame.size()) > n_) {
    throw ValidationError("fft: frame longer than transform size");
  }
  std::vector<double> re(n_, 0.0), im(n_, 0.0);
  std::copy(frame.begin(), frame.end(), re.begin());
  transform(re, im);
  StftFrame out;
  out.frame_index = frame_index;
  out.fft_size = n_;
  out.coefficients.resize(n_ / 2 + 1);
  for (int k = 0; k <= n_ / 2; ++k) out.coefficients[k] = {re[k], im[k]};
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank build_mel_filterbank(int bands, int fft_size, int sample_rate, double f_low,
                                   double f_high, FilterShape shape) {
  if (bands < 1) throw ValidationError("filterbank: need at least one band");
  if (f_high <= 0.0) f_high = sample_rate / 2.0;
  if (!(f_low < f_high) || f_high > sample_rate / 2.0 + 1e-9) {
    throw ValidationError("filterbank: need 0 <= f_low < f_high <= rate/2");
  }

  const int bins = fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  MelFilterbank fb;
  fb.fft_size = fft_size;
  fb.sample_rate = sample_rate;
  fb.shape = shape;
  fb.weights.assign(bands, std::vector<double>(bins, 0.0));
  fb.bin_range.assign(bands, {bins, -1});
  fb.edges_hz.resize(bands);

  const double mel_lo = hz_to_mel(f_low);
  const double mel_hi = hz_to_mel(f_high);

  if (shape == FilterShape::rectangular) {
    // Disjoint partition: bands+1 edges, each bin assigned to the band whose
    // half-open [lo, hi) interval contains its center frequency.
    std::vector<double> edge(bands + 1);
    for (int b = 0; b <= bands; ++b) {
      edge[b] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * b / bands);
    }
    for (int b = 0; b < bands; ++b) fb.edges_hz[b] = {edge[b], edge[b + 1]};
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      // The top edge itself (Nyquist when f_high = rate/2) belongs to the
      // last band so the partition covers the full closed range.
      if (f < edge[0] - 1e-9 || f > edge[bands] + 1e-9) continue;
      int b = 0;
      while (b + 1 < bands && f >= edge[b + 1]) ++b;
      fb.weights[b][k] = 1.0;
      fb.bin_range[b].first = std::min(fb.bin_range[b].first, k);
      fb.bin_range[b].second = std::max(fb.bin_range[b].second, k);
    }
  } else {
    // Unit-peak overlapping triangles on bands+2 mel-spaced points.
    std::vector<double> node(bands + 2);
    for (int b = 0; b < bands + 2; ++b) {
      node[b] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * b / (bands + 1));
    }
    for (int b = 0; b < bands; ++b) {
      const double lo = node[b], mid = node[b + 1], hi = node[b + 2];
      fb.edges_hz[b] = {lo, hi};
      for (int k = 0; k < bins; ++k) {
        const double f = k * bin_hz;
        double w = 0.0;
        if (f > lo && f < mid) {
          w = (f - lo) / (mid - lo);
        } else if (f >= mid && f < hi) {
          w = hi == mid ? 0.0 : (hi - f) / (hi - mid);
        }
        if (w > 0.0) {
          fb.weights[b][k] = w;
          fb.bin_range[b].first = std::min(fb.bin_range[b].first, k);
          fb.bin_range[b].second = std::max(fb.bin_range[b].second, k);
        }
      }
    }
  }

  for (int b = 0; b < bands; ++b) {
    if (fb.bin_range[b].second < fb.bin_range[b].first) {
      throw ValidationError("filterbank: band " + std::to_string(b) +
                            " covers no FFT bin; too many bands for fft size " +
                            std::to_string(fft_size));
    }
  }
  return fb;
}

namespace {

FeatureVolume mel_energies_impl(const std::vector<std::span<const float>>& channels,
                                std::size_t length, const DspConfig& cfg) {
  const FramingPlan plan(cfg.hop_samples(), cfg.window_samples(cfg.mel_window_seconds));
  const int fft_size = next_pow2(plan.window);
  const Fft fft(fft_size);
  const auto bank = build_mel_filterbank(cfg.mel_bands, fft_size, cfg.sample_rate, cfg.mel_f_low,
                                         cfg.mel_f_high, FilterShape::triangular);
  const auto win = hamming_window(plan.window);
  const auto frames = plan.frame_count(length);
  const int num_ch = static_cast<int>(channels.size());

  FeatureVolume vol(static_cast<int>(frames), cfg.mel_bands, num_ch, FeatureType::mel,
                    cfg.hop_seconds);

  parallel_for(static_cast<std::int64_t>(frames), [&](std::int64_t t) {
    std::vector<double> buf(plan.window);
    std::vector<double> spectrum(static_cast<std::size_t>(fft_size) / 2 + 1);
    for (int c = 0; c < num_ch; ++c) {
      extract_frame(channels[c], plan, t, buf);
      for (int n = 0; n < plan.window; ++n) buf[n] *= win[n];
      const auto stft = fft.real_forward(buf, static_cast<int>(t));
      for (std::size_t k = 0; k < spectrum.size(); ++k) {
        const double m = std::abs(stft.coefficients[k]);
        spectrum[k] = cfg.power_spectrum ? m * m : m;
      }
      for (int b = 0; b < cfg.mel_bands; ++b) {
        double e = 0.0;
        const auto [k0, k1] = bank.bin_range[b];
        for (int k = k0; k <= k1; ++k) e += bank.weights[b][k] * spectrum[k];
        vol.at(static_cast<int>(t), b, c) =
            static_cast<float>(std::log(std::max(e, cfg.log_floor)));
      }
    }
  });
  return vol;
}

}  // namespace

FeatureVolume log_mel_energies(const AudioClip& clip, const DspConfig& cfg) {
  clip.validate();
  if (clip.sample_rate != cfg.sample_rate) {
    throw ValidationError("clip '" + clip.id + "' is not at the configured sample rate");
  }
  if (clip.length() == 0) throw ValidationError("clip '" + clip.id + "' is empty");
  std::vector<std::span<const float>> ch;
  for (const auto& s : clip.samples) ch.emplace_back(s);
  return mel_energies_impl(ch, clip.length(), cfg);
}

FeatureVolume log_mel_energies_downmix(const AudioClip& clip, const DspConfig& cfg) {
  clip.validate();
  if (clip.sample_rate != cfg.sample_rate) {
    throw ValidationError("clip '" + clip.id + "' is not at the configured sample rate");
  }
  if (clip.length() == 0) throw ValidationError("clip '" + clip.id + "' is empty");
  std::vector<float> mono(clip.length(), 0.0f);
  const float inv = 1.0f / static_cast<float>(clip.channels());
  for (const auto& s : clip.samples) {
    for (std::size_t i = 0; i < s.size(); ++i) mono[i] += s[i] * inv;
  }
  std::vector<std::span<const float>> ch{std::span<const float>(mono)};
  return mel_energies_impl(ch, mono.size(), cfg);
}

}  // namespace binsed
