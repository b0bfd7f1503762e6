// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0
//
// Naive serial reference implementations used as test oracles and as the
// baseline side of the kernel benchmarks. Each routine is written directly
// from the defining formula (quadratic DFT, six-loop convolution, time-domain
// correlation) and deliberately shares no code with the optimized kernels in
// binsed_core.

#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "binsed/audio_io.hpp"
#include "binsed/nn_core.hpp"

namespace binsed::reference {

/// O(N^2) discrete Fourier transform, all N bins.
std::vector<std::complex<double>> naive_dft(std::span<const double> x);

/// Time-domain cross-correlation sum_n x1(n) * x2(n + lag) over the overlap.
double time_domain_xcorr(std::span<const double> x1, std::span<const double> x2, int lag);

/// Lag of the maximum time-domain cross-correlation in [-max_lag, max_lag].
int time_domain_xcorr_peak(std::span<const double> x1, std::span<const double> x2, int max_lag);

/// Band-masked PHAT correlation straight from the two-sided definition:
/// naive DFTs, per-bin whitening, and a direct complex-exponential sum per
/// lag. `band_weights` covers bins 0..N/2 and is mirrored to the other half.
std::vector<double> naive_gcc_phat(std::span<const double> frame1,
                                   std::span<const double> frame2,
                                   std::span<const double> band_weights, int fft_size,
                                   int tau_max);

/// Biased frame autocorrelation normalized by lag zero.
std::vector<double> naive_autocorrelation(std::span<const double> frame, int lag_lo, int count);

/// Six-loop 2-D cross-correlation with same padding, matching the layout of
/// conv2d_forward.
void naive_conv2d(const Ten3<double>& in, int filters, int kh, int kw,
                  std::span<const double> w, std::span<const double> b, Ten3<double>& out);

/// Segment-based scores from first principles: exact integer counts.
struct NaiveScores {
  std::int64_t tp = 0, fp = 0, fn = 0, n = 0, s = 0, d = 0, i = 0;
  double f() const;
  bool er_defined() const { return n > 0; }
  double er() const;
};

/// ref/sys are per-segment class index sets (duplicates ignored).
NaiveScores naive_segment_scores(const std::vector<std::vector<int>>& ref,
                                 const std::vector<std::vector<int>>& sys);

/// Collapses a roll to per-segment sets by direct scanning.
std::vector<std::vector<int>> naive_roll_segments(const EventRoll& roll, int frames_per_segment);

}  // namespace binsed::reference
