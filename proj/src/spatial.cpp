// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "binsed/spatial.hpp"

#include <algorithm>
#include <cmath>

namespace binsed {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPhatFloor = 1e-12;

void require_binaural(const AudioClip& clip, const char* feature) {
  if (clip.channels() != 2) {
    throw ValidationError(std::string(feature) + " requires a binaural clip, got " +
                          std::to_string(clip.channels()) + " channel(s) in '" + clip.id + "'");
  }
}

void require_rate(const AudioClip& clip, const DspConfig& cfg) {
  clip.validate();
  if (clip.sample_rate != cfg.sample_rate) {
    throw ValidationError("clip '" + clip.id + "' is not at the configured sample rate");
  }
  if (clip.length() == 0) throw ValidationError("clip '" + clip.id + "' is empty");
}

// Per-lag phase step e^{-i*2*pi*k/N} for every one-sided bin.
struct LagTables {
  int fft_size = 0;
  std::vector<double> step_re, step_im;

  explicit LagTables(int n) : fft_size(n), step_re(n / 2 + 1), step_im(n / 2 + 1) {
    for (int k = 0; k <= n / 2; ++k) {
      step_re[k] = std::cos(-2.0 * kPi * k / n);
      step_im[k] = std::sin(-2.0 * kPi * k / n);
    }
  }
};

// Whitened cross-spectrum w(k) = H(k) * X1 * conj(X2) / max(|X1||X2|, floor),
// evaluated over the one-sided bins, then swept over integer lags with a
// per-bin phase recurrence. A positive lag means channel 1 leads: the sweep
// matches the time-domain correlation sum_n x1(n) * x2(n + lag).
GccSpectrum gcc_sweep(const StftFrame& ch1, const StftFrame& ch2, const MelFilterbank& bank,
                      int tau_max, const LagTables& tables) {
  if (ch1.fft_size != ch2.fft_size) {
    throw ValidationError("gcc: channel spectra have different fft sizes");
  }
  if (ch1.fft_size != bank.fft_size) {
    throw ValidationError("gcc: filterbank fft size does not match the spectra");
  }
  const int n = ch1.fft_size;
  if (tau_max < 0 || tau_max >= n / 2) {
    throw ValidationError("gcc: tau_max must lie in [0, fft_size/2)");
  }
  const int half = n / 2;
  const int bands = bank.bands();

  std::vector<double> wre(half + 1), wim(half + 1);
  for (int k = 0; k <= half; ++k) {
    const auto& a = ch1.coefficients[k];
    const auto& b = ch2.coefficients[k];
    const double cr = a.real() * b.real() + a.imag() * b.imag();
    const double ci = a.imag() * b.real() - a.real() * b.imag();
    const double denom = std::max(std::abs(a) * std::abs(b), kPhatFloor);
    wre[k] = cr / denom;
    wim[k] = ci / denom;
  }

  // Interior bins contribute twice (conjugate-symmetric mirror); DC and
  // Nyquist once. Start the phase at lag -tau_max.
  std::vector<double> pre(half + 1), pim(half + 1);
  for (int k = 0; k <= half; ++k) {
    const double phi = 2.0 * kPi * k * tau_max / n;  // e^{-i*2*pi*k*(-tau_max)/N}
    pre[k] = std::cos(phi);
    pim[k] = std::sin(phi);
  }

  GccSpectrum out;
  out.tau_max = tau_max;
  out.values.assign(bands, std::vector<double>(2 * tau_max + 1, 0.0));

  const int lags = 2 * tau_max + 1;
  for (int li = 0; li < lags; ++li) {
    const int delta = li - tau_max;
    const double nyq_parity = (delta & 1) ? -1.0 : 1.0;
    for (int b = 0; b < bands; ++b) {
      const auto [k0, k1] = bank.bin_range[b];
      const auto& h = bank.weights[b];
      double acc = 0.0;
      const int lo = std::max(k0, 1);
      const int hi = std::min(k1, half - 1);
      for (int k = lo; k <= hi; ++k) {
        acc += h[k] * (wre[k] * pre[k] - wim[k] * pim[k]);
      }
      double r = 2.0 * acc;
      if (k0 == 0) r += h[0] * wre[0];
      if (k1 == half) r += h[half] * wre[half] * nyq_parity;
      out.values[b][li] = r;
    }
    if (li + 1 < lags) {
      for (int k = 0; k <= half; ++k) {
        const double nr = pre[k] * tables.step_re[k] - pim[k] * tables.step_im[k];
        const double ni = pre[k] * tables.step_im[k] + pim[k] * tables.step_re[k];
        pre[k] = nr;
        pim[k] = ni;
      }
    }
  }
  return out;
}

struct ResolutionContext {
  FramingPlan plan;
  Fft fft;
  LagTables tables;
  MelFilterbank bank;
  std::vector<double> window;

  ResolutionContext(const DspConfig& dsp, double seconds, int bands)
      : plan(dsp.hop_samples(), dsp.window_samples(seconds)),
        fft(next_pow2(plan.window)),
        tables(fft.size()),
        bank(build_mel_filterbank(bands, fft.size(), dsp.sample_rate, 0.0, 0.0,
                                  FilterShape::rectangular)),
        window(hamming_window(plan.window)) {}
};

}  // namespace

GccSpectrum gcc_phat(const StftFrame& ch1, const StftFrame& ch2, const MelFilterbank& bank,
                     int tau_max) {
  const LagTables tables(ch1.fft_size);
  return gcc_sweep(ch1, ch2, bank, tau_max, tables);
}

int gcc_peak_lag(const GccSpectrum& gcc, int band) {
  const int tau_max = gcc.tau_max;
  int best_lag = 0;
  double best = -1.0;
  // Visit lags in tie-break priority: 0, -1, +1, -2, +2, ...
  for (int m = 0; m <= tau_max; ++m) {
    for (const int delta : {-m, m}) {
      const double v = std::abs(gcc.at(band, delta));
      if (v > best) {
        best = v;
        best_lag = delta;
      }
      if (m == 0) break;
    }
  }
  return best_lag;
}

FeatureVolume extract_tdoa(const AudioClip& clip, const SpatialConfig& cfg) {
  require_rate(clip, cfg.dsp);
  require_binaural(clip, "tdoa");

  const FramingPlan hop_plan(cfg.dsp.hop_samples(), cfg.dsp.hop_samples());
  const auto frames = hop_plan.frame_count(clip.length());
  FeatureVolume vol(static_cast<int>(frames), cfg.tdoa_bands, 3, FeatureType::tdoa,
                    cfg.dsp.hop_seconds);

  for (int r = 0; r < 3; ++r) {
    const ResolutionContext ctx(cfg.dsp, cfg.resolutions_seconds[r], cfg.tdoa_bands);
    parallel_for(static_cast<std::int64_t>(frames), [&](std::int64_t t) {
      std::vector<double> buf(ctx.plan.window);
      StftFrame spectra[2];
      for (int c = 0; c < 2; ++c) {
        extract_frame(clip.samples[c], ctx.plan, t, buf);
        for (int n = 0; n < ctx.plan.window; ++n) buf[n] *= ctx.window[n];
        spectra[c] = ctx.fft.real_forward(buf, static_cast<int>(t));
      }
      const auto gcc = gcc_sweep(spectra[0], spectra[1], ctx.bank, cfg.tau_max, ctx.tables);
      for (int b = 0; b < cfg.tdoa_bands; ++b) {
        vol.at(static_cast<int>(t), b, r) = static_cast<float>(gcc_peak_lag(gcc, b));
      }
    });
  }
  return vol;
}

FeatureVolume extract_gcc(const AudioClip& clip, const SpatialConfig& cfg) {
  require_rate(clip, cfg.dsp);
  require_binaural(clip, "gcc");
  if (cfg.gcc_lag_lo < -cfg.tau_max || cfg.gcc_lag_hi > cfg.tau_max ||
      cfg.gcc_lag_lo > cfg.gcc_lag_hi) {
    throw ValidationError("gcc: lag range must lie within [-tau_max, tau_max]");
  }

  const int num_lags = cfg.gcc_lag_hi - cfg.gcc_lag_lo + 1;
  const FramingPlan hop_plan(cfg.dsp.hop_samples(), cfg.dsp.hop_samples());
  const auto frames = hop_plan.frame_count(clip.length());
  FeatureVolume vol(static_cast<int>(frames), num_lags, 3, FeatureType::gcc,
                    cfg.dsp.hop_seconds);

  for (int r = 0; r < 3; ++r) {
    const ResolutionContext ctx(cfg.dsp, cfg.resolutions_seconds[r], 1);
    parallel_for(static_cast<std::int64_t>(frames), [&](std::int64_t t) {
      std::vector<double> buf(ctx.plan.window);
      StftFrame spectra[2];
      for (int c = 0; c < 2; ++c) {
        extract_frame(clip.samples[c], ctx.plan, t, buf);
        for (int n = 0; n < ctx.plan.window; ++n) buf[n] *= ctx.window[n];
        spectra[c] = ctx.fft.real_forward(buf, static_cast<int>(t));
      }
      const auto gcc = gcc_sweep(spectra[0], spectra[1], ctx.bank, cfg.tau_max, ctx.tables);
      for (int i = 0; i < num_lags; ++i) {
        vol.at(static_cast<int>(t), i, r) = static_cast<float>(gcc.at(0, cfg.gcc_lag_lo + i));
      }
    });
  }
  return vol;
}

FeatureVolume extract_dom_freq(const AudioClip& clip, const SpatialConfig& cfg) {
  require_rate(clip, cfg.dsp);
  const DspConfig& dsp = cfg.dsp;
  const FramingPlan plan(dsp.hop_samples(), dsp.window_samples(dsp.mel_window_seconds));
  const int n = cfg.domfreq_fft_size;
  if (n < plan.window) throw ValidationError("domfreq: fft size smaller than analysis window");
  const Fft fft(n);
  const auto win = hamming_window(plan.window);
  const auto frames = plan.frame_count(clip.length());
  const int num_ch = clip.channels();
  const double bin_hz = static_cast<double>(dsp.sample_rate) / n;

  // Layer order: frequencies for each channel, then magnitudes for each
  // channel, so a binaural clip yields T x 3 x 4.
  FeatureVolume vol(static_cast<int>(frames), cfg.domfreq_peaks, 2 * num_ch, FeatureType::domfreq,
                    dsp.hop_seconds);

  const int k_lo = std::max(1, static_cast<int>(std::floor(cfg.domfreq_f_low / bin_hz)));
  const int k_hi = std::min(n / 2 - 1, static_cast<int>(std::ceil(cfg.domfreq_f_high / bin_hz)));

  parallel_for(static_cast<std::int64_t>(frames), [&](std::int64_t t) {
    std::vector<double> buf(plan.window);
    std::vector<double> mags(static_cast<std::size_t>(n) / 2 + 1);
    for (int c = 0; c < num_ch; ++c) {
      extract_frame(clip.samples[c], plan, t, buf);
      for (int m = 0; m < plan.window; ++m) buf[m] *= win[m];
      const auto stft = fft.real_forward(buf, static_cast<int>(t));
      for (std::size_t k = 0; k < mags.size(); ++k) mags[k] = std::abs(stft.coefficients[k]);

      double frame_max = 0.0;
      for (int k = k_lo; k <= k_hi; ++k) frame_max = std::max(frame_max, mags[k]);

      std::vector<std::pair<double, double>> peaks;  // (magnitude, frequency)
      if (frame_max > 0.0) {
        for (int k = k_lo; k <= k_hi; ++k) {
          if (!(mags[k] > mags[k - 1] && mags[k] >= mags[k + 1])) continue;
          const double alpha = std::log(std::max(mags[k - 1], 1e-300));
          const double beta = std::log(std::max(mags[k], 1e-300));
          const double gamma = std::log(std::max(mags[k + 1], 1e-300));
          const double denom = alpha - 2.0 * beta + gamma;
          double delta = denom == 0.0 ? 0.0 : 0.5 * (alpha - gamma) / denom;
          delta = std::clamp(delta, -0.5, 0.5);
          const double freq = (k + delta) * bin_hz;
          if (freq < cfg.domfreq_f_low || freq > cfg.domfreq_f_high) continue;
          const double mag = std::exp(beta - 0.25 * (alpha - gamma) * delta);
          if (mag >= cfg.domfreq_threshold * frame_max) peaks.emplace_back(mag, freq);
        }
      }
      std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });

      for (int p = 0; p < cfg.domfreq_peaks; ++p) {
        const bool have = p < static_cast<int>(peaks.size());
        vol.at(static_cast<int>(t), p, c) = have ? static_cast<float>(peaks[p].second) : 0.0f;
        vol.at(static_cast<int>(t), p, num_ch + c) =
            have ? static_cast<float>(peaks[p].first) : 0.0f;
      }
    }
  });
  return vol;
}

FeatureVolume extract_acr(const AudioClip& clip, const SpatialConfig& cfg) {
  require_rate(clip, cfg.dsp);
  require_binaural(clip, "acr");
  const DspConfig& dsp = cfg.dsp;
  const FramingPlan plan(dsp.hop_samples(), dsp.window_samples(dsp.mel_window_seconds));
  const int lag_hi = cfg.acr_lag_lo + cfg.acr_count - 1;
  if (lag_hi >= plan.window) {
    throw ValidationError("acr: lag range exceeds the analysis window");
  }
  const auto frames = plan.frame_count(clip.length());
  const int num_ch = clip.channels();

  FeatureVolume vol(static_cast<int>(frames), cfg.acr_count, num_ch, FeatureType::acr,
                    dsp.hop_seconds);

  parallel_for(static_cast<std::int64_t>(frames), [&](std::int64_t t) {
    std::vector<double> buf(plan.window);
    for (int c = 0; c < num_ch; ++c) {
      extract_frame(clip.samples[c], plan, t, buf);
      double r0 = 0.0;
      for (int m = 0; m < plan.window; ++m) r0 += buf[m] * buf[m];
      if (r0 <= 0.0) {
        for (int i = 0; i < cfg.acr_count; ++i) vol.at(static_cast<int>(t), i, c) = 0.0f;
        continue;
      }
      for (int i = 0; i < cfg.acr_count; ++i) {
        const int lag = cfg.acr_lag_lo + i;
        double r = 0.0;
        for (int m = 0; m + lag < plan.window; ++m) r += buf[m] * buf[m + lag];
        vol.at(static_cast<int>(t), i, c) = static_cast<float>(r / r0);
      }
    }
  });
  return vol;
}

}  // namespace binsed
