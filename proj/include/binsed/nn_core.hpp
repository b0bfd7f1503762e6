// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0
//
// Dense tensor containers and the layer kernels of the network: 2-D
// convolution, batch normalization, feature-axis max pooling, LSTM, the
// sigmoid output layer and binary cross-entropy.
//
// Everything is templated on the scalar type: training runs in float, the
// finite-difference gradient tests instantiate the same code in double.
//
// Parallel loops only ever write disjoint outputs and keep accumulations in
// a fixed serial order, so results do not depend on the thread count.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "binsed/common.hpp"

namespace binsed {

template <class Real>
struct Mat {
  int rows = 0, cols = 0;
  std::vector<Real> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, Real(0)) {}
  Real* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const Real* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
  Real& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  Real at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  void zero() { std::fill(v.begin(), v.end(), Real(0)); }
};

/// T x L x C, frame-major, last index fastest.
template <class Real>
struct Ten3 {
  int d0 = 0, d1 = 0, d2 = 0;
  std::vector<Real> v;

  Ten3() = default;
  Ten3(int a, int b, int c)
      : d0(a), d1(b), d2(c), v(static_cast<std::size_t>(a) * b * c, Real(0)) {}
  Real& at(int i, int j, int k) { return v[(static_cast<std::size_t>(i) * d1 + j) * d2 + k]; }
  Real at(int i, int j, int k) const {
    return v[(static_cast<std::size_t>(i) * d1 + j) * d2 + k];
  }
  Real* row(int i, int j) { return v.data() + (static_cast<std::size_t>(i) * d1 + j) * d2; }
  const Real* row(int i, int j) const {
    return v.data() + (static_cast<std::size_t>(i) * d1 + j) * d2;
  }
  void zero() { std::fill(v.begin(), v.end(), Real(0)); }
};

template <class Real>
inline Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

// ---------------------------------------------------------------------------
// Convolution: 2-D cross-correlation over (time, feature) with "same" zero
// padding on both axes. Weights are stored (in_ch, kh, kw, filters) with the
// filter index fastest so the inner loops stream contiguously.
// ---------------------------------------------------------------------------

struct ConvDims {
  int in_ch = 0;
  int filters = 0;
  int kh = 3;
  int kw = 3;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(in_ch) * kh * kw * filters;
  }
};

template <class Real>
void conv2d_forward(const Ten3<Real>& in, const ConvDims& d, const Real* w, const Real* b,
                    Ten3<Real>& out) {
  if (in.d2 != d.in_ch || out.d0 != in.d0 || out.d1 != in.d1 || out.d2 != d.filters) {
    throw ValidationError("conv2d_forward: shape mismatch");
  }
  const int T = in.d0, L = in.d1, C = d.in_ch, F = d.filters;
  const int oh = d.kh / 2, ow = d.kw / 2;
  parallel_for(T, [&](std::int64_t t) {
    for (int l = 0; l < L; ++l) {
      Real* orow = out.row(static_cast<int>(t), l);
      for (int f = 0; f < F; ++f) orow[f] = b[f];
      for (int di = 0; di < d.kh; ++di) {
        const int ti = static_cast<int>(t) + di - oh;
        if (ti < 0 || ti >= T) continue;
        for (int dj = 0; dj < d.kw; ++dj) {
          const int lj = l + dj - ow;
          if (lj < 0 || lj >= L) continue;
          const Real* irow = in.row(ti, lj);
          const Real* wbase = w + ((static_cast<std::size_t>(0) * d.kh + di) * d.kw + dj) * F;
          for (int c = 0; c < C; ++c) {
            const Real a = irow[c];
            const Real* wrow = wbase + static_cast<std::size_t>(c) * d.kh * d.kw * F;
            for (int f = 0; f < F; ++f) orow[f] += a * wrow[f];
          }
        }
      }
    }
  });
}

/// dW/db accumulate over the whole batch; din is overwritten per element.
/// Weight gradients are parallel over (c, di, dj) tasks, each of which sums
/// the batch in a fixed order.
template <class Real>
void conv2d_backward_input(const Ten3<Real>& dout, const ConvDims& d, const Real* w,
                           Ten3<Real>& din) {
  const int T = dout.d0, L = dout.d1, C = d.in_ch, F = d.filters;
  const int oh = d.kh / 2, ow = d.kw / 2;
  parallel_for(T, [&](std::int64_t t) {
    for (int l = 0; l < L; ++l) {
      Real* drow = din.row(static_cast<int>(t), l);
      for (int c = 0; c < C; ++c) drow[c] = Real(0);
      // Gather: in(t,l) contributed to out(t - di + oh, l - dj + ow).
      for (int di = 0; di < d.kh; ++di) {
        const int to = static_cast<int>(t) - di + oh;
        if (to < 0 || to >= T) continue;
        for (int dj = 0; dj < d.kw; ++dj) {
          const int lo = l - dj + ow;
          if (lo < 0 || lo >= L) continue;
          const Real* orow = dout.row(to, lo);
          for (int c = 0; c < C; ++c) {
            const Real* wrow =
                w + ((static_cast<std::size_t>(c) * d.kh + di) * d.kw + dj) * F;
            Real acc = Real(0);
            for (int f = 0; f < F; ++f) acc += wrow[f] * orow[f];
            drow[c] += acc;
          }
        }
      }
    }
  });
}

template <class Real>
void conv2d_backward_params(const std::vector<const Ten3<Real>*>& ins,
                            const std::vector<Ten3<Real>>& douts, const ConvDims& d, Real* dw,
                            Real* db) {
  const int C = d.in_ch, F = d.filters;
  const int oh = d.kh / 2, ow = d.kw / 2;
  parallel_for(static_cast<std::int64_t>(C) * d.kh * d.kw, [&](std::int64_t task) {
    const int c = static_cast<int>(task / (d.kh * d.kw));
    const int rem = static_cast<int>(task % (d.kh * d.kw));
    const int di = rem / d.kw;
    const int dj = rem % d.kw;
    Real* wrow = dw + ((static_cast<std::size_t>(c) * d.kh + di) * d.kw + dj) * F;
    for (std::size_t e = 0; e < ins.size(); ++e) {
      const Ten3<Real>& in = *ins[e];
      const Ten3<Real>& dout = douts[e];
      const int T = in.d0, L = in.d1;
      for (int t = 0; t < T; ++t) {
        const int ti = t + di - oh;
        if (ti < 0 || ti >= T) continue;
        for (int l = 0; l < L; ++l) {
          const int lj = l + dj - ow;
          if (lj < 0 || lj >= L) continue;
          const Real a = in.at(ti, lj, c);
          const Real* orow = dout.row(t, l);
          for (int f = 0; f < F; ++f) wrow[f] += a * orow[f];
        }
      }
    }
  });
  // Bias gradient: one fixed-order pass.
  for (const auto& dout : douts) {
    const std::size_t cells = dout.v.size() / F;
    for (std::size_t i = 0; i < cells; ++i) {
      const Real* orow = dout.v.data() + i * F;
      for (int f = 0; f < F; ++f) db[f] += orow[f];
    }
  }
}

// ---------------------------------------------------------------------------
// Batch normalization, one statistic per feature map over (batch, time,
// feature-width).
// ---------------------------------------------------------------------------

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;

template <class Real>
struct BnBatchStats {
  std::vector<Real> mean, var;  // per map, biased variance
  std::int64_t count = 0;
};

/// Batch statistics with per-element partial sums combined in element order.
template <class Real>
BnBatchStats<Real> bn_compute_stats(const std::vector<Ten3<Real>>& xs) {
  if (xs.empty()) throw ValidationError("batchnorm: empty batch");
  const int F = xs[0].d2;
  std::vector<std::vector<Real>> psum(xs.size()), psq(xs.size());
  parallel_for(static_cast<std::int64_t>(xs.size()), [&](std::int64_t e) {
    psum[e].assign(F, Real(0));
    psq[e].assign(F, Real(0));
    const auto& x = xs[e];
    const std::size_t cells = x.v.size() / F;
    for (std::size_t i = 0; i < cells; ++i) {
      const Real* row = x.v.data() + i * F;
      for (int f = 0; f < F; ++f) {
        psum[e][f] += row[f];
        psq[e][f] += row[f] * row[f];
      }
    }
  });
  BnBatchStats<Real> st;
  st.mean.assign(F, Real(0));
  st.var.assign(F, Real(0));
  for (std::size_t e = 0; e < xs.size(); ++e) {
    st.count += static_cast<std::int64_t>(xs[e].v.size() / F);
    for (int f = 0; f < F; ++f) {
      st.mean[f] += psum[e][f];
      st.var[f] += psq[e][f];
    }
  }
  if (st.count == 0) throw ValidationError("batchnorm: zero-size batch");
  for (int f = 0; f < F; ++f) {
    const Real mu = st.mean[f] / static_cast<Real>(st.count);
    Real var = st.var[f] / static_cast<Real>(st.count) - mu * mu;
    if (var < Real(0)) var = Real(0);
    st.mean[f] = mu;
    st.var[f] = var;
  }
  return st;
}

template <class Real>
void bn_apply(const Ten3<Real>& x, const Real* mean, const Real* var, const Real* gamma,
              const Real* beta, Ten3<Real>& out) {
  const int F = x.d2;
  std::vector<Real> scale(F), shift(F);
  for (int f = 0; f < F; ++f) {
    const Real inv = Real(1) / std::sqrt(var[f] + Real(kBnEps));
    scale[f] = gamma[f] * inv;
    shift[f] = beta[f] - mean[f] * scale[f];
  }
  const std::size_t cells = x.v.size() / F;
  for (std::size_t i = 0; i < cells; ++i) {
    const Real* xr = x.v.data() + i * F;
    Real* orow = out.v.data() + i * F;
    for (int f = 0; f < F; ++f) orow[f] = xr[f] * scale[f] + shift[f];
  }
}

/// Exact gradient through the train-mode normalization (statistics included).
/// dgamma/dbeta accumulate; dx overwrites each element's tensor.
template <class Real>
void bn_backward(const std::vector<Ten3<Real>>& xs, const std::vector<Ten3<Real>>& douts,
                 const BnBatchStats<Real>& st, const Real* gamma, Real* dgamma, Real* dbeta,
                 std::vector<Ten3<Real>>& dxs) {
  const int F = xs[0].d2;
  const Real m = static_cast<Real>(st.count);

  std::vector<std::vector<Real>> pd(xs.size()), pdx(xs.size());
  parallel_for(static_cast<std::int64_t>(xs.size()), [&](std::int64_t e) {
    pd[e].assign(F, Real(0));   // sum of dout
    pdx[e].assign(F, Real(0));  // sum of dout * xhat
    const auto& x = xs[e];
    const auto& dout = douts[e];
    const std::size_t cells = x.v.size() / F;
    for (int f = 0; f < F; ++f) {
      const Real inv = Real(1) / std::sqrt(st.var[f] + Real(kBnEps));
      Real sd = Real(0), sdx = Real(0);
      for (std::size_t i = 0; i < cells; ++i) {
        const Real g = dout.v[i * F + f];
        sd += g;
        sdx += g * (x.v[i * F + f] - st.mean[f]) * inv;
      }
      pd[e][f] = sd;
      pdx[e][f] = sdx;
    }
  });

  std::vector<Real> sum_d(F, Real(0)), sum_dx(F, Real(0));
  for (std::size_t e = 0; e < xs.size(); ++e) {
    for (int f = 0; f < F; ++f) {
      sum_d[f] += pd[e][f];
      sum_dx[f] += pdx[e][f];
    }
  }
  for (int f = 0; f < F; ++f) {
    dgamma[f] += sum_dx[f];
    dbeta[f] += sum_d[f];
  }

  // dx = (gamma * inv / m) * (m*dout - sum_d - xhat * sum_dx)
  parallel_for(static_cast<std::int64_t>(xs.size()), [&](std::int64_t e) {
    const auto& x = xs[e];
    const auto& dout = douts[e];
    auto& dx = dxs[e];
    const std::size_t cells = x.v.size() / F;
    for (int f = 0; f < F; ++f) {
      const Real inv = Real(1) / std::sqrt(st.var[f] + Real(kBnEps));
      const Real k = gamma[f] * inv / m;
      for (std::size_t i = 0; i < cells; ++i) {
        const Real xhat = (x.v[i * F + f] - st.mean[f]) * inv;
        dx.v[i * F + f] = k * (m * dout.v[i * F + f] - sum_d[f] - xhat * sum_dx[f]);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Feature-axis max pooling (never on the time axis).
// ---------------------------------------------------------------------------

template <class Real>
void maxpool_forward(const Ten3<Real>& in, int pool, Ten3<Real>& out,
                     std::vector<std::uint8_t>& argmax) {
  if (pool < 1 || in.d1 % pool != 0) {
    throw ValidationError("maxpool: pool factor must divide the feature length");
  }
  const int T = in.d0, Lo = in.d1 / pool, F = in.d2;
  argmax.assign(static_cast<std::size_t>(T) * Lo * F, 0);
  parallel_for(T, [&](std::int64_t t) {
    for (int lo = 0; lo < Lo; ++lo) {
      Real* orow = out.row(static_cast<int>(t), lo);
      std::uint8_t* arow =
          argmax.data() + (static_cast<std::size_t>(t) * Lo + lo) * F;
      const Real* first = in.row(static_cast<int>(t), lo * pool);
      for (int f = 0; f < F; ++f) orow[f] = first[f];
      for (int p = 1; p < pool; ++p) {
        const Real* irow = in.row(static_cast<int>(t), lo * pool + p);
        for (int f = 0; f < F; ++f) {
          if (irow[f] > orow[f]) {
            orow[f] = irow[f];
            arow[f] = static_cast<std::uint8_t>(p);
          }
        }
      }
    }
  });
}

template <class Real>
void maxpool_backward(const Ten3<Real>& dout, int pool, const std::vector<std::uint8_t>& argmax,
                      Ten3<Real>& din) {
  const int T = dout.d0, Lo = dout.d1, F = dout.d2;
  din.zero();
  parallel_for(T, [&](std::int64_t t) {
    for (int lo = 0; lo < Lo; ++lo) {
      const Real* orow = dout.row(static_cast<int>(t), lo);
      const std::uint8_t* arow =
          argmax.data() + (static_cast<std::size_t>(t) * Lo + lo) * F;
      for (int f = 0; f < F; ++f) {
        din.at(static_cast<int>(t), lo * pool + arow[f], f) = orow[f];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling at train time).
// ---------------------------------------------------------------------------

/// Counter-based Bernoulli mask: cell i keeps iff u01(seed, i) >= rate, so
/// masks are reproducible and can be generated in parallel.
inline void fill_dropout_mask(std::uint64_t seed, double rate, std::span<std::uint8_t> mask) {
  parallel_for(static_cast<std::int64_t>(mask.size()), [&](std::int64_t i) {
    const std::uint64_t h = splitmix64(seed ^ static_cast<std::uint64_t>(i));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    mask[static_cast<std::size_t>(i)] = u >= rate ? 1 : 0;
  });
}

template <class Real>
void dropout_apply(std::span<Real> x, std::span<const std::uint8_t> mask, Real rate) {
  const Real scale = Real(1) / (Real(1) - rate);
  parallel_for(static_cast<std::int64_t>(x.size()), [&](std::int64_t i) {
    x[static_cast<std::size_t>(i)] =
        mask[static_cast<std::size_t>(i)] ? x[static_cast<std::size_t>(i)] * scale : Real(0);
  });
}

// ---------------------------------------------------------------------------
// LSTM (single direction).  Gate rows are ordered input, forget, cell
// candidate, output.
// ---------------------------------------------------------------------------

template <class Real>
struct LstmCache {
  Mat<Real> gates;  // T x 4H, post-activation
  Mat<Real> c;      // T x H
  Mat<Real> h;      // T x H
};

/// x rows are visited in natural order for the forward direction and in
/// reverse for the backward direction of a bidirectional layer; the caller
/// provides the mapping.
template <class Real, class RowFn>
void lstm_forward_dir(int T, int D, int H, RowFn x_row, const Real* w, const Real* u,
                      const Real* b, LstmCache<Real>& cache) {
  cache.gates = Mat<Real>(T, 4 * H);
  cache.c = Mat<Real>(T, H);
  cache.h = Mat<Real>(T, H);
  std::vector<Real> z(4 * H);
  for (int s = 0; s < T; ++s) {
    const Real* x = x_row(s);
    const Real* hprev = s > 0 ? cache.h.row(s - 1) : nullptr;
    for (int r = 0; r < 4 * H; ++r) {
      const Real* wr = w + static_cast<std::size_t>(r) * D;
      Real acc = b[r];
      for (int j = 0; j < D; ++j) acc += wr[j] * x[j];
      if (hprev) {
        const Real* ur = u + static_cast<std::size_t>(r) * H;
        for (int j = 0; j < H; ++j) acc += ur[j] * hprev[j];
      }
      z[r] = acc;
    }
    Real* g = cache.gates.row(s);
    Real* c = cache.c.row(s);
    Real* h = cache.h.row(s);
    const Real* cprev = s > 0 ? cache.c.row(s - 1) : nullptr;
    for (int j = 0; j < H; ++j) {
      const Real gi = sigmoid(z[j]);
      const Real gf = sigmoid(z[H + j]);
      const Real gg = std::tanh(z[2 * H + j]);
      const Real go = sigmoid(z[3 * H + j]);
      g[j] = gi;
      g[H + j] = gf;
      g[2 * H + j] = gg;
      g[3 * H + j] = go;
      c[j] = gf * (cprev ? cprev[j] : Real(0)) + gi * gg;
      h[j] = go * std::tanh(c[j]);
    }
    for (int j = 0; j < H; ++j) {
      if (!std::isfinite(static_cast<double>(h[j]))) {
        throw ValidationError("lstm: non-finite activation at frame " + std::to_string(s));
      }
    }
  }
}

/// Backpropagation through time for one direction. dh_out is the gradient on
/// this direction's output rows (direction-local time order). Produces
/// per-step pre-activation gate gradients (for the weight updates) and the
/// gradient with respect to the inputs via dx_row.
template <class Real, class RowFn, class DxFn>
void lstm_backward_dir(int T, int D, int H, RowFn /*x_row*/, DxFn dx_row, const Real* w,
                       const Real* u, const Mat<Real>& dh_out, const LstmCache<Real>& cache,
                       Mat<Real>& dgates) {
  dgates = Mat<Real>(T, 4 * H);
  std::vector<Real> dh(H, Real(0)), dc(H, Real(0));
  for (int s = T - 1; s >= 0; --s) {
    const Real* g = cache.gates.row(s);
    const Real* c = cache.c.row(s);
    const Real* cprev = s > 0 ? cache.c.row(s - 1) : nullptr;
    Real* dz = dgates.row(s);
    for (int j = 0; j < H; ++j) {
      const Real gi = g[j], gf = g[H + j], gg = g[2 * H + j], go = g[3 * H + j];
      const Real tc = std::tanh(c[j]);
      const Real dhj = dh_out.at(s, j) + dh[j];
      const Real doj = dhj * tc;
      const Real dcj = dhj * go * (Real(1) - tc * tc) + dc[j];
      const Real dij = dcj * gg;
      const Real dgj = dcj * gi;
      const Real dfj = dcj * (cprev ? cprev[j] : Real(0));
      dz[j] = dij * gi * (Real(1) - gi);
      dz[H + j] = dfj * gf * (Real(1) - gf);
      dz[2 * H + j] = dgj * (Real(1) - gg * gg);
      dz[3 * H + j] = doj * go * (Real(1) - go);
      dc[j] = dcj * gf;
    }
    // dh_{s-1} = U^T dz ; dx_s = W^T dz
    std::fill(dh.begin(), dh.end(), Real(0));
    Real* dx = dx_row(s);
    for (int r = 0; r < 4 * H; ++r) {
      const Real dzr = dz[r];
      if (dzr == Real(0)) continue;
      const Real* ur = u + static_cast<std::size_t>(r) * H;
      for (int j = 0; j < H; ++j) dh[j] += ur[j] * dzr;
      const Real* wr = w + static_cast<std::size_t>(r) * D;
      for (int j = 0; j < D; ++j) dx[j] += wr[j] * dzr;
    }
  }
}

// ---------------------------------------------------------------------------
// Output layer and loss.
// ---------------------------------------------------------------------------

template <class Real>
void dense_sigmoid_forward(const Mat<Real>& in, int K, const Real* w, const Real* b,
                           Mat<Real>& probs) {
  const int T = in.rows, D = in.cols;
  probs = Mat<Real>(T, K);
  parallel_for(T, [&](std::int64_t t) {
    const Real* x = in.row(static_cast<int>(t));
    Real* p = probs.row(static_cast<int>(t));
    for (int k = 0; k < K; ++k) {
      const Real* wr = w + static_cast<std::size_t>(k) * D;
      Real acc = b[k];
      for (int j = 0; j < D; ++j) acc += wr[j] * x[j];
      p[k] = sigmoid(acc);
    }
  });
}

/// Mean binary cross-entropy over unmasked (frame, class) cells, with the
/// probability clipped to [1e-7, 1 - 1e-7]. Returns the summed loss and the
/// number of counted cells; the caller divides.
template <class Real>
std::pair<double, std::int64_t> bce_loss_sum(const Mat<Real>& probs, const Mat<Real>& targets,
                                             std::span<const std::uint8_t> frame_mask) {
  if (probs.rows != targets.rows || probs.cols != targets.cols) {
    throw ValidationError("bce: prediction and target shapes differ");
  }
  const double lo = 1e-7, hi = 1.0 - 1e-7;
  double sum = 0.0;
  std::int64_t count = 0;
  for (int t = 0; t < probs.rows; ++t) {
    if (!frame_mask.empty() && !frame_mask[t]) continue;
    const Real* p = probs.row(t);
    const Real* y = targets.row(t);
    for (int k = 0; k < probs.cols; ++k) {
      const double pc = std::min(std::max(static_cast<double>(p[k]), lo), hi);
      sum -= static_cast<double>(y[k]) * std::log(pc) +
             (1.0 - static_cast<double>(y[k])) * std::log(1.0 - pc);
      count += 1;
    }
  }
  return {sum, count};
}

/// Gradient of the mean clipped BCE with respect to the pre-sigmoid logits.
/// Cells whose probability fell outside the clip range get a zero gradient
/// (the clipped loss is flat there).
template <class Real>
void bce_logit_grad(const Mat<Real>& probs, const Mat<Real>& targets,
                    std::span<const std::uint8_t> frame_mask, double inv_count,
                    Mat<Real>& dlogits) {
  dlogits = Mat<Real>(probs.rows, probs.cols);
  const double lo = 1e-7, hi = 1.0 - 1e-7;
  for (int t = 0; t < probs.rows; ++t) {
    if (!frame_mask.empty() && !frame_mask[t]) continue;
    const Real* p = probs.row(t);
    const Real* y = targets.row(t);
    Real* g = dlogits.row(t);
    for (int k = 0; k < probs.cols; ++k) {
      const double pd = static_cast<double>(p[k]);
      if (pd < lo || pd > hi) {
        g[k] = Real(0);
      } else {
        g[k] = static_cast<Real>((pd - static_cast<double>(y[k])) * inv_count);
      }
    }
  }
}

}  // namespace binsed
