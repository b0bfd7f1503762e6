// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "binsed/dsp.hpp"

namespace binsed {

/// Settings for the spatial/spectral extractors. The lag grid of the
/// autocorrelation feature (acr_lag_lo .. acr_lag_lo + acr_count - 1) covers
/// roughly 107.6 Hz to 4410 Hz at 44.1 kHz.
struct SpatialConfig {
  DspConfig dsp;
  int tau_max = 30;  // max interchannel sample delay
  int gcc_lag_lo = -29;
  int gcc_lag_hi = 30;
  std::array<double, 3> resolutions_seconds{0.120, 0.240, 0.480};
  int tdoa_bands = 5;
  double domfreq_f_low = 100.0;
  double domfreq_f_high = 4000.0;
  double domfreq_threshold = 0.01;  // fraction of the frame's max magnitude
  int domfreq_peaks = 3;
  int domfreq_fft_size = 8192;  // zero-padded for sub-bin peak accuracy
  int acr_lag_lo = 10;
  int acr_count = 400;
};

/// Whitened cross-power correlation over integer lags, one row per mel band.
/// values[b][tau_max + delta] is the correlation at lag delta; positive lags
/// mean channel 1 leads channel 2.
struct GccSpectrum {
  int tau_max = 0;
  std::vector<std::vector<double>> values;  // bands x (2*tau_max+1)

  int lags() const { return 2 * tau_max + 1; }
  double at(int band, int delta) const { return values[band][delta + tau_max]; }
};

/// Phase-transform cross-correlation of two one-sided spectra, integrated
/// per filterbank band. The whitening denominator is floored at 1e-12 so
/// silent frames yield zeros instead of NaNs.
GccSpectrum gcc_phat(const StftFrame& ch1, const StftFrame& ch2, const MelFilterbank& bank,
                     int tau_max);

/// Per-band lag argmax of |gcc|; ties resolve toward the smallest |lag| and
/// then toward the negative lag.
int gcc_peak_lag(const GccSpectrum& gcc, int band);

/// Per-band time differences of arrival: T x tdoa_bands x 3 resolutions,
/// layers ordered by ascending window length.
FeatureVolume extract_tdoa(const AudioClip& clip, const SpatialConfig& cfg);

/// Raw whitened cross-correlation values at lags gcc_lag_lo..gcc_lag_hi
/// (full-range band): T x 60 x 3 resolutions.
FeatureVolume extract_gcc(const AudioClip& clip, const SpatialConfig& cfg);

/// Three strongest spectral peaks per channel in [f_low, f_high], refined by
/// parabolic interpolation of log magnitudes: T x 3 x 2*channels, layers
/// [freq ch1, freq ch2, mag ch1, mag ch2]. Missing peaks are (0, 0).
FeatureVolume extract_dom_freq(const AudioClip& clip, const SpatialConfig& cfg);

/// Frame autocorrelation normalized by lag 0, sampled at acr_count lags:
/// T x 400 x channels.
FeatureVolume extract_acr(const AudioClip& clip, const SpatialConfig& cfg);

}  // namespace binsed
