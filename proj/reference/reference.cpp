// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace binsed::reference {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<std::complex<double>> naive_dft(std::span<const double> x) {
  const auto n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      const double phi = -2.0 * kPi * static_cast<double>(k) * static_cast<double>(m) /
                         static_cast<double>(n);
      acc += x[m] * std::complex<double>(std::cos(phi), std::sin(phi));
    }
    out[k] = acc;
  }
  return out;
}

double time_domain_xcorr(std::span<const double> x1, std::span<const double> x2, int lag) {
  double acc = 0.0;
  const auto n = static_cast<std::int64_t>(x1.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t j = i + lag;
    if (j < 0 || j >= static_cast<std::int64_t>(x2.size())) continue;
    acc += x1[static_cast<std::size_t>(i)] * x2[static_cast<std::size_t>(j)];
  }
  return acc;
}

int time_domain_xcorr_peak(std::span<const double> x1, std::span<const double> x2, int max_lag) {
  int best_lag = -max_lag;
  double best = -1.0;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const double v = std::abs(time_domain_xcorr(x1, x2, lag));
    if (v > best) {
      best = v;
      best_lag = lag;
    }
  }
  return best_lag;
}

std::vector<double> naive_gcc_phat(std::span<const double> frame1,
                                   std::span<const double> frame2,
                                   std::span<const double> band_weights, int fft_size,
                                   int tau_max) {
  std::vector<double> padded1(fft_size, 0.0), padded2(fft_size, 0.0);
  std::copy(frame1.begin(), frame1.end(), padded1.begin());
  std::copy(frame2.begin(), frame2.end(), padded2.begin());
  const auto s1 = naive_dft(padded1);
  const auto s2 = naive_dft(padded2);

  std::vector<double> out(2 * tau_max + 1, 0.0);
  for (int li = 0; li <= 2 * tau_max; ++li) {
    const int delta = li - tau_max;
    std::complex<double> acc(0.0, 0.0);
    for (int k = 0; k < fft_size; ++k) {
      const int folded = k <= fft_size / 2 ? k : fft_size - k;
      const double h = band_weights[static_cast<std::size_t>(folded)];
      if (h == 0.0) continue;
      const std::complex<double> cross = s1[k] * std::conj(s2[k]);
      const double denom = std::max(std::abs(s1[k]) * std::abs(s2[k]), 1e-12);
      const double phi = -2.0 * kPi * k * delta / fft_size;
      acc += h * (cross / denom) * std::complex<double>(std::cos(phi), std::sin(phi));
    }
    out[static_cast<std::size_t>(li)] = acc.real();
  }
  return out;
}

std::vector<double> naive_autocorrelation(std::span<const double> frame, int lag_lo, int count) {
  double r0 = 0.0;
  for (double v : frame) r0 += v * v;
  std::vector<double> out(count, 0.0);
  if (r0 <= 0.0) return out;
  for (int i = 0; i < count; ++i) {
    const int lag = lag_lo + i;
    double acc = 0.0;
    for (std::size_t n = 0; n + lag < frame.size(); ++n) {
      acc += frame[n] * frame[n + static_cast<std::size_t>(lag)];
    }
    out[static_cast<std::size_t>(i)] = acc / r0;
  }
  return out;
}

void naive_conv2d(const Ten3<double>& in, int filters, int kh, int kw,
                  std::span<const double> w, std::span<const double> b, Ten3<double>& out) {
  const int T = in.d0, L = in.d1, C = in.d2;
  out = Ten3<double>(T, L, filters);
  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < L; ++l) {
      for (int f = 0; f < filters; ++f) {
        double acc = b[static_cast<std::size_t>(f)];
        for (int c = 0; c < C; ++c) {
          for (int di = 0; di < kh; ++di) {
            for (int dj = 0; dj < kw; ++dj) {
              const int ti = t + di - kh / 2;
              const int lj = l + dj - kw / 2;
              if (ti < 0 || ti >= T || lj < 0 || lj >= L) continue;
              const std::size_t widx =
                  ((static_cast<std::size_t>(c) * kh + di) * kw + dj) * filters + f;
              acc += in.at(ti, lj, c) * w[widx];
            }
          }
        }
        out.at(t, l, f) = acc;
      }
    }
  }
}

double NaiveScores::f() const {
  const std::int64_t den = 2 * tp + fp + fn;
  return den == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

double NaiveScores::er() const {
  return static_cast<double>(s + d + i) / static_cast<double>(n);
}

NaiveScores naive_segment_scores(const std::vector<std::vector<int>>& ref,
                                 const std::vector<std::vector<int>>& sys) {
  NaiveScores sc;
  const std::size_t total = std::max(ref.size(), sys.size());
  for (std::size_t k = 0; k < total; ++k) {
    std::set<int> r, y;
    if (k < ref.size()) r.insert(ref[k].begin(), ref[k].end());
    if (k < sys.size()) y.insert(sys[k].begin(), sys[k].end());

    std::int64_t tp = 0;
    for (int c : y) {
      if (r.count(c)) ++tp;
    }
    const auto fp = static_cast<std::int64_t>(y.size()) - tp;
    const auto fn = static_cast<std::int64_t>(r.size()) - tp;
    sc.tp += tp;
    sc.fp += fp;
    sc.fn += fn;
    sc.n += static_cast<std::int64_t>(r.size());
    sc.s += std::min(fn, fp);
    sc.d += std::max<std::int64_t>(0, fn - fp);
    sc.i += std::max<std::int64_t>(0, fp - fn);
  }
  return sc;
}

std::vector<std::vector<int>> naive_roll_segments(const EventRoll& roll, int frames_per_segment) {
  std::vector<std::vector<int>> out;
  for (std::size_t t0 = 0; t0 < roll.frames; t0 += static_cast<std::size_t>(frames_per_segment)) {
    std::set<int> active;
    for (std::size_t t = t0;
         t < std::min(roll.frames, t0 + static_cast<std::size_t>(frames_per_segment)); ++t) {
      for (std::size_t k = 0; k < roll.classes(); ++k) {
        if (roll.at(t, k)) active.insert(static_cast<int>(k));
      }
    }
    out.emplace_back(active.begin(), active.end());
  }
  return out;
}

}  // namespace binsed::reference
