// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0
//
// Templated implementation details of model.hpp.

#pragma once

#include <algorithm>
#include <cmath>

namespace binsed {

template <class Real>
Model<Real>::Model(ModelConfig cfg) : config(std::move(cfg)) {
  config.validate();
  merged_width = 0;
  for (const auto& spec : config.branches) {
    std::vector<ConvBlockRef> layers;
    int width = spec.input_length;
    int in_ch = spec.input_layers;
    for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
      const auto& blk = spec.blocks[k];
      ConvBlockRef ref;
      ref.dims = ConvDims{in_ch, blk.filters, blk.kh, blk.kw};
      ref.pool = blk.pool;
      ref.in_len = width;
      const std::string base = "branch." + spec.feature + ".conv" + std::to_string(k);
      ref.w = params.add(base + ".w", ref.dims.weight_count());
      ref.b = params.add(base + ".b", static_cast<std::size_t>(blk.filters));
      ref.gamma = params.add(base + ".bn.gamma", static_cast<std::size_t>(blk.filters));
      ref.beta = params.add(base + ".bn.beta", static_cast<std::size_t>(blk.filters));
      ref.rmean = state.add(base + ".bn.rmean", static_cast<std::size_t>(blk.filters));
      ref.rvar = state.add(base + ".bn.rvar", static_cast<std::size_t>(blk.filters));
      width /= blk.pool;
      in_ch = blk.filters;
      layers.push_back(ref);
    }
    branch_layers.push_back(std::move(layers));
    merged_width += spec.flat_width();
  }

  const int H = config.lstm_units;
  auto add_bilstm = [&](const char* name, int input) {
    BilstmRef r;
    r.input = input;
    r.hidden = H;
    for (int dir = 0; dir < 2; ++dir) {
      LstmDirRef& d = dir == 0 ? r.fwd : r.bwd;
      d.input = input;
      d.hidden = H;
      const std::string base = std::string(name) + (dir == 0 ? ".fwd" : ".bwd");
      d.w = params.add(base + ".w", static_cast<std::size_t>(4) * H * input);
      d.u = params.add(base + ".u", static_cast<std::size_t>(4) * H * H);
      d.b = params.add(base + ".b", static_cast<std::size_t>(4) * H);
    }
    return r;
  };
  lstm1 = add_bilstm("lstm1", merged_width);
  lstm2 = add_bilstm("lstm2", 2 * H);

  output.input = 2 * H;
  output.output = config.classes();
  output.w = params.add("out.w", static_cast<std::size_t>(output.output) * output.input);
  output.b = params.add("out.b", static_cast<std::size_t>(output.output));
}

template <class Real>
void Model<Real>::init_params(Rng& rng) {
  auto uniform_fill = [&](std::size_t off, std::size_t count, double limit) {
    for (std::size_t idx = 0; idx < count; ++idx) {
      params.data[off + idx] = static_cast<Real>(rng.uniform(-limit, limit));
    }
  };

  for (std::size_t b = 0; b < branch_layers.size(); ++b) {
    for (const auto& ref : branch_layers[b]) {
      const double fan_in = static_cast<double>(ref.dims.in_ch) * ref.dims.kh * ref.dims.kw;
      const double fan_out = static_cast<double>(ref.dims.filters) * ref.dims.kh * ref.dims.kw;
      uniform_fill(ref.w, ref.dims.weight_count(), std::sqrt(6.0 / (fan_in + fan_out)));
      // biases stay zero
      for (int f = 0; f < ref.dims.filters; ++f) {
        params.data[ref.gamma + f] = Real(1);
        state.data[ref.rvar + f] = Real(1);
      }
    }
  }

  auto init_lstm = [&](const LstmDirRef& d) {
    uniform_fill(d.w, static_cast<std::size_t>(4) * d.hidden * d.input,
                 std::sqrt(6.0 / (d.input + 4.0 * d.hidden)));
    uniform_fill(d.u, static_cast<std::size_t>(4) * d.hidden * d.hidden,
                 std::sqrt(6.0 / (d.hidden + 4.0 * d.hidden)));
    for (int j = 0; j < d.hidden; ++j) params.data[d.b + d.hidden + j] = Real(1);  // forget gate
  };
  init_lstm(lstm1.fwd);
  init_lstm(lstm1.bwd);
  init_lstm(lstm2.fwd);
  init_lstm(lstm2.bwd);

  uniform_fill(output.w, static_cast<std::size_t>(output.output) * output.input,
               std::sqrt(6.0 / (output.input + output.output)));
}

namespace detail {

template <class Real>
void relu_inplace(Ten3<Real>& x) {
  for (auto& v : x.v) v = v > Real(0) ? v : Real(0);
}

/// Runs both directions of a bidirectional layer for one sequence and
/// concatenates per-frame outputs as [forward | backward].
template <class Real>
void bilstm_run(const Mat<Real>& x, const BilstmRef& r, const ParamStore<Real>& params,
                std::array<LstmCache<Real>, 2>& caches, Mat<Real>& out) {
  const int T = x.rows, D = r.input, H = r.hidden;
  lstm_forward_dir<Real>(
      T, D, H, [&](int s) { return x.row(s); }, params.at(r.fwd.w), params.at(r.fwd.u),
      params.at(r.fwd.b), caches[0]);
  lstm_forward_dir<Real>(
      T, D, H, [&](int s) { return x.row(T - 1 - s); }, params.at(r.bwd.w), params.at(r.bwd.u),
      params.at(r.bwd.b), caches[1]);
  out = Mat<Real>(T, 2 * H);
  for (int t = 0; t < T; ++t) {
    const Real* hf = caches[0].h.row(t);
    const Real* hb = caches[1].h.row(T - 1 - t);
    Real* o = out.row(t);
    std::copy(hf, hf + H, o);
    std::copy(hb, hb + H, o + H);
  }
}

/// BPTT through a bidirectional layer for one sequence. d_out is the
/// gradient on the concatenated output; dx accumulates the input gradient;
/// dgates (per direction, direction-local time) feed the weight updates.
template <class Real>
void bilstm_backward_seq(const Mat<Real>& /*x*/, const BilstmRef& r,
                         const ParamStore<Real>& params,
                         const std::array<LstmCache<Real>, 2>& caches, const Mat<Real>& d_out,
                         Mat<Real>& dx, std::array<Mat<Real>, 2>& dgates) {
  const int T = d_out.rows, H = r.hidden;
  dx.zero();
  Mat<Real> dh_fwd(T, H), dh_bwd(T, H);
  for (int t = 0; t < T; ++t) {
    const Real* row = d_out.row(t);
    std::copy(row, row + H, dh_fwd.row(t));
    std::copy(row + H, row + 2 * H, dh_bwd.row(T - 1 - t));
  }
  lstm_backward_dir<Real>(
      T, r.input, H, [](int) { return nullptr; }, [&](int s) { return dx.row(s); },
      params.at(r.fwd.w), params.at(r.fwd.u), dh_fwd, caches[0], dgates[0]);
  lstm_backward_dir<Real>(
      T, r.input, H, [](int) { return nullptr; }, [&](int s) { return dx.row(T - 1 - s); },
      params.at(r.bwd.w), params.at(r.bwd.u), dh_bwd, caches[1], dgates[1]);
}

/// Accumulates LSTM weight gradients from cached gate gradients; rows of the
/// weight matrices are processed in parallel, elements and time in fixed
/// order. x_of(e, s) must return the direction-mapped input row.
template <class Real, class XFn>
void lstm_param_grads(int batch, int T, int D, int H, XFn x_of,
                      const std::vector<const Mat<Real>*>& dgates,
                      const std::vector<const Mat<Real>*>& hs, Real* dw, Real* du, Real* db) {
  parallel_for(4 * H, [&](std::int64_t r) {
    Real* wrow = dw + static_cast<std::size_t>(r) * D;
    Real* urow = du + static_cast<std::size_t>(r) * H;
    double bacc = 0.0;
    for (int e = 0; e < batch; ++e) {
      for (int s = 0; s < T; ++s) {
        const Real g = dgates[e]->at(s, static_cast<int>(r));
        if (g == Real(0)) continue;
        const Real* x = x_of(e, s);
        for (int j = 0; j < D; ++j) wrow[j] += g * x[j];
        if (s > 0) {
          const Real* hprev = hs[e]->row(s - 1);
          for (int j = 0; j < H; ++j) urow[j] += g * hprev[j];
        }
        bacc += static_cast<double>(g);
      }
    }
    db[r] += static_cast<Real>(bacc);
  });
}

}  // namespace detail

template <class Real>
void forward_train(Model<Real>& model, const std::vector<SequenceBatchItem<Real>>& batch,
                   Real dropout_rate, Rng& rng, ForwardCache<Real>& cache, bool update_running) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw ValidationError("forward_train: empty batch");
  const auto& branches = model.config.branches;
  if (batch[0].branch_inputs.size() != branches.size()) {
    throw ValidationError("forward_train: batch item branch count does not match the model");
  }
  const int T = batch[0].branch_inputs[0].d0;

  cache = ForwardCache<Real>();
  cache.batch = B;
  cache.frames = T;
  cache.dropout_on = dropout_rate > Real(0);
  cache.dropout_rate = dropout_rate;
  cache.branches.resize(branches.size());

  // One mask seed per (branch, block, element) and per LSTM output element,
  // drawn serially up front so the pass is reproducible for a fixed rng.
  std::vector<std::uint64_t> mask_seeds;
  if (cache.dropout_on) {
    const std::size_t per_branch = [&] {
      std::size_t n = 0;
      for (const auto& s : branches) n += s.blocks.size();
      return n;
    }();
    mask_seeds.resize((per_branch + 2) * static_cast<std::size_t>(B));
    for (auto& s : mask_seeds) s = rng.next_u64();
  }
  std::size_t seed_cursor = 0;

  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    const auto& spec = branches[bi];
    auto& blocks = cache.branches[bi];
    blocks.resize(spec.blocks.size());

    std::vector<const Ten3<Real>*> cur(B);
    for (int e = 0; e < B; ++e) {
      const auto& in = batch[e].branch_inputs[bi];
      if (in.d0 != T || in.d1 != spec.input_length || in.d2 != spec.input_layers) {
        throw ValidationError("forward_train: input shape mismatch for branch '" + spec.feature +
                              "'");
      }
      cur[e] = &in;
    }

    for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
      const auto& ref = model.branch_layers[bi][k];
      auto& bc = blocks[k];
      const int Lin = ref.in_len;
      const int F = ref.dims.filters;

      bc.conv_out.assign(B, Ten3<Real>());
      parallel_for(B, [&](std::int64_t e) {
        bc.conv_out[e] = Ten3<Real>(T, Lin, F);
        conv2d_forward(*cur[e], ref.dims, model.params.at(ref.w), model.params.at(ref.b),
                       bc.conv_out[e]);
      });

      bc.stats = bn_compute_stats(bc.conv_out);
      if (update_running) {
        Real* rmean = model.state.at(ref.rmean);
        Real* rvar = model.state.at(ref.rvar);
        for (int f = 0; f < F; ++f) {
          rmean[f] = static_cast<Real>(kBnMomentum) * rmean[f] +
                     static_cast<Real>(1.0 - kBnMomentum) * bc.stats.mean[f];
          rvar[f] = static_cast<Real>(kBnMomentum) * rvar[f] +
                    static_cast<Real>(1.0 - kBnMomentum) * bc.stats.var[f];
        }
      }

      bc.act.assign(B, Ten3<Real>());
      bc.pool_idx.assign(B, {});
      bc.post.assign(B, Ten3<Real>());
      bc.drop_mask.assign(B, {});
      const int Lout = Lin / ref.pool;

      std::vector<std::uint64_t> seeds(B, 0);
      if (cache.dropout_on) {
        for (int e = 0; e < B; ++e) seeds[e] = mask_seeds[seed_cursor + e];
        seed_cursor += B;
      }

      parallel_for(B, [&](std::int64_t e) {
        bc.act[e] = Ten3<Real>(T, Lin, F);
        bn_apply(bc.conv_out[e], bc.stats.mean.data(), bc.stats.var.data(),
                 model.params.at(ref.gamma), model.params.at(ref.beta), bc.act[e]);
        detail::relu_inplace(bc.act[e]);
        bc.post[e] = Ten3<Real>(T, Lout, F);
        maxpool_forward(bc.act[e], ref.pool, bc.post[e], bc.pool_idx[e]);
        if (cache.dropout_on) {
          bc.drop_mask[e].resize(bc.post[e].v.size());
          fill_dropout_mask(seeds[e], static_cast<double>(dropout_rate), bc.drop_mask[e]);
          dropout_apply<Real>(bc.post[e].v, bc.drop_mask[e], dropout_rate);
        }
      });

      for (int e = 0; e < B; ++e) cur[e] = &bc.post[e];
    }
  }

  // Merge branches per frame: flattened (width, maps) blocks side by side.
  cache.merged.assign(B, Mat<Real>());
  parallel_for(B, [&](std::int64_t e) {
    Mat<Real>& m = cache.merged[e];
    m = Mat<Real>(T, model.merged_width);
    int off = 0;
    for (std::size_t bi = 0; bi < branches.size(); ++bi) {
      const Ten3<Real>& post = cache.branches[bi].back().post[e];
      const int W = post.d1, F = post.d2;
      for (int t = 0; t < T; ++t) {
        Real* row = m.row(t) + off;
        const Real* src = post.row(t, 0);
        std::copy(src, src + static_cast<std::size_t>(W) * F, row);
      }
      off += W * F;
    }
  });

  auto run_bilstm_layer = [&](const BilstmRef& ref, const std::vector<Mat<Real>>& xs,
                              std::vector<std::array<LstmCache<Real>, 2>>& caches,
                              std::vector<Mat<Real>>& outs,
                              std::vector<std::vector<std::uint8_t>>& masks) {
    caches.resize(B);
    outs.assign(B, Mat<Real>());
    masks.assign(B, {});
    std::vector<std::uint64_t> seeds(B, 0);
    if (cache.dropout_on) {
      for (int e = 0; e < B; ++e) seeds[e] = mask_seeds[seed_cursor + e];
      seed_cursor += B;
    }
    parallel_for(B, [&](std::int64_t e) {
      detail::bilstm_run(xs[e], ref, model.params, caches[e], outs[e]);
      if (cache.dropout_on) {
        masks[e].resize(outs[e].v.size());
        fill_dropout_mask(seeds[e], static_cast<double>(dropout_rate), masks[e]);
        dropout_apply<Real>(outs[e].v, masks[e], dropout_rate);
      }
    });
  };

  run_bilstm_layer(model.lstm1, cache.merged, cache.lstm1_cache, cache.lstm1_out,
                   cache.lstm1_mask);
  run_bilstm_layer(model.lstm2, cache.lstm1_out, cache.lstm2_cache, cache.lstm2_out,
                   cache.lstm2_mask);

  cache.probs.assign(B, Mat<Real>());
  parallel_for(B, [&](std::int64_t e) {
    dense_sigmoid_forward(cache.lstm2_out[e], model.output.output, model.params.at(model.output.w),
                          model.params.at(model.output.b), cache.probs[e]);
  });
}

template <class Real>
Mat<Real> forward_infer(const Model<Real>& model, const std::vector<Ten3<Real>>& branch_inputs,
                        Mat<Real>* merged_out) {
  const auto& branches = model.config.branches;
  if (branch_inputs.size() != branches.size()) {
    throw ValidationError("forward_infer: expected " + std::to_string(branches.size()) +
                          " feature volumes, got " + std::to_string(branch_inputs.size()));
  }
  const int T = branch_inputs[0].d0;

  Mat<Real> merged(T, model.merged_width);
  int off = 0;
  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    const auto& spec = branches[bi];
    const auto& in = branch_inputs[bi];
    if (in.d0 != T || in.d1 != spec.input_length || in.d2 != spec.input_layers) {
      throw ValidationError("forward_infer: input shape mismatch for branch '" + spec.feature +
                            "'");
    }
    Ten3<Real> cur = in;
    for (const auto& ref : model.branch_layers[bi]) {
      Ten3<Real> conv(T, ref.in_len, ref.dims.filters);
      conv2d_forward(cur, ref.dims, model.params.at(ref.w), model.params.at(ref.b), conv);
      Ten3<Real> act(T, ref.in_len, ref.dims.filters);
      bn_apply(conv, model.state.at(ref.rmean), model.state.at(ref.rvar),
               model.params.at(ref.gamma), model.params.at(ref.beta), act);
      detail::relu_inplace(act);
      Ten3<Real> pooled(T, ref.in_len / ref.pool, ref.dims.filters);
      std::vector<std::uint8_t> idx;
      maxpool_forward(act, ref.pool, pooled, idx);
      cur = std::move(pooled);
    }
    const int W = cur.d1, F = cur.d2;
    for (int t = 0; t < T; ++t) {
      const Real* src = cur.row(t, 0);
      std::copy(src, src + static_cast<std::size_t>(W) * F, merged.row(t) + off);
    }
    off += W * F;
  }

  if (merged_out) *merged_out = merged;

  std::array<LstmCache<Real>, 2> c1, c2;
  Mat<Real> h1, h2;
  detail::bilstm_run(merged, model.lstm1, model.params, c1, h1);
  detail::bilstm_run(h1, model.lstm2, model.params, c2, h2);
  Mat<Real> probs;
  dense_sigmoid_forward(h2, model.output.output, model.params.at(model.output.w),
                        model.params.at(model.output.b), probs);
  return probs;
}

template <class Real>
double batch_loss(const ForwardCache<Real>& cache,
                  const std::vector<SequenceBatchItem<Real>>& batch) {
  double sum = 0.0;
  std::int64_t count = 0;
  for (int e = 0; e < cache.batch; ++e) {
    const auto [s, c] = bce_loss_sum(cache.probs[e], batch[e].targets, batch[e].frame_mask);
    sum += s;
    count += c;
  }
  if (count == 0) throw ValidationError("batch_loss: every frame is masked out");
  return sum / static_cast<double>(count);
}

template <class Real>
void backward(Model<Real>& model, const std::vector<SequenceBatchItem<Real>>& batch,
              ForwardCache<Real>& cache, std::vector<Real>& grads) {
  const int B = cache.batch;
  const int T = cache.frames;
  const int K = model.output.output;
  const int H = model.config.lstm_units;

  if (grads.size() != model.params.data.size()) {
    throw ValidationError("backward: gradient buffer size mismatch");
  }
  std::fill(grads.begin(), grads.end(), Real(0));

  std::int64_t count = 0;
  for (int e = 0; e < B; ++e) {
    count += bce_loss_sum(cache.probs[e], batch[e].targets, batch[e].frame_mask).second;
  }
  const double inv_count = 1.0 / static_cast<double>(count);

  // Output layer.
  std::vector<Mat<Real>> dlogits(B), d_h2(B);
  parallel_for(B, [&](std::int64_t e) {
    bce_logit_grad(cache.probs[e], batch[e].targets, batch[e].frame_mask, inv_count, dlogits[e]);
    d_h2[e] = Mat<Real>(T, 2 * H);
    const Real* w = model.params.at(model.output.w);
    for (int t = 0; t < T; ++t) {
      const Real* g = dlogits[e].row(t);
      Real* dx = d_h2[e].row(t);
      for (int k = 0; k < K; ++k) {
        const Real gk = g[k];
        if (gk == Real(0)) continue;
        const Real* wr = w + static_cast<std::size_t>(k) * 2 * H;
        for (int j = 0; j < 2 * H; ++j) dx[j] += gk * wr[j];
      }
    }
  });
  {
    Real* dw = grads.data() + model.output.w;
    Real* db = grads.data() + model.output.b;
    parallel_for(K, [&](std::int64_t k) {
      Real* wrow = dw + static_cast<std::size_t>(k) * 2 * H;
      double bacc = 0.0;
      for (int e = 0; e < B; ++e) {
        for (int t = 0; t < T; ++t) {
          const Real g = dlogits[e].at(t, static_cast<int>(k));
          if (g == Real(0)) continue;
          const Real* x = cache.lstm2_out[e].row(t);
          for (int j = 0; j < 2 * H; ++j) wrow[j] += g * x[j];
          bacc += static_cast<double>(g);
        }
      }
      db[k] += static_cast<Real>(bacc);
    });
  }

  auto dropout_backward = [&](Mat<Real>& d, const std::vector<std::uint8_t>& mask) {
    if (!cache.dropout_on) return;
    const Real scale = Real(1) / (Real(1) - cache.dropout_rate);
    for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] = mask[i] ? d.v[i] * scale : Real(0);
  };

  // Second bidirectional layer.
  std::vector<Mat<Real>> d_h1(B);
  std::vector<std::array<Mat<Real>, 2>> dgates2(B);
  parallel_for(B, [&](std::int64_t e) {
    dropout_backward(d_h2[e], cache.lstm2_mask[e]);
    d_h1[e] = Mat<Real>(T, 2 * H);
    detail::bilstm_backward_seq(cache.lstm1_out[e], model.lstm2, model.params,
                                cache.lstm2_cache[e], d_h2[e], d_h1[e], dgates2[e]);
  });
  for (int dir = 0; dir < 2; ++dir) {
    const LstmDirRef& dref = dir == 0 ? model.lstm2.fwd : model.lstm2.bwd;
    std::vector<const Mat<Real>*> dg(B), hs(B);
    for (int e = 0; e < B; ++e) {
      dg[e] = &dgates2[e][dir];
      hs[e] = &cache.lstm2_cache[e][dir].h;
    }
    detail::lstm_param_grads<Real>(
        B, T, 2 * H, H,
        [&](int e, int s) {
          return cache.lstm1_out[e].row(dir == 0 ? s : T - 1 - s);
        },
        dg, hs, grads.data() + dref.w, grads.data() + dref.u, grads.data() + dref.b);
  }

  // First bidirectional layer.
  std::vector<Mat<Real>> d_merged(B);
  std::vector<std::array<Mat<Real>, 2>> dgates1(B);
  parallel_for(B, [&](std::int64_t e) {
    dropout_backward(d_h1[e], cache.lstm1_mask[e]);
    d_merged[e] = Mat<Real>(T, model.merged_width);
    detail::bilstm_backward_seq(cache.merged[e], model.lstm1, model.params, cache.lstm1_cache[e],
                                d_h1[e], d_merged[e], dgates1[e]);
  });
  for (int dir = 0; dir < 2; ++dir) {
    const LstmDirRef& dref = dir == 0 ? model.lstm1.fwd : model.lstm1.bwd;
    std::vector<const Mat<Real>*> dg(B), hs(B);
    for (int e = 0; e < B; ++e) {
      dg[e] = &dgates1[e][dir];
      hs[e] = &cache.lstm1_cache[e][dir].h;
    }
    detail::lstm_param_grads<Real>(
        B, T, model.merged_width, H,
        [&](int e, int s) {
          return cache.merged[e].row(dir == 0 ? s : T - 1 - s);
        },
        dg, hs, grads.data() + dref.w, grads.data() + dref.u, grads.data() + dref.b);
  }

  // Branches, in reverse block order.
  int off = 0;
  for (std::size_t bi = 0; bi < model.config.branches.size(); ++bi) {
    const auto& spec = model.config.branches[bi];
    auto& blocks = cache.branches[bi];
    const int W = blocks.back().post[0].d1;
    const int F = blocks.back().post[0].d2;

    std::vector<Ten3<Real>> d_post(B);
    parallel_for(B, [&](std::int64_t e) {
      d_post[e] = Ten3<Real>(T, W, F);
      for (int t = 0; t < T; ++t) {
        const Real* src = d_merged[e].row(t) + off;
        Real* dst = d_post[e].row(t, 0);
        std::copy(src, src + static_cast<std::size_t>(W) * F, dst);
      }
    });
    off += W * F;

    for (int k = static_cast<int>(spec.blocks.size()) - 1; k >= 0; --k) {
      const auto& ref = model.branch_layers[bi][k];
      auto& bc = blocks[k];
      const int Fk = ref.dims.filters;

      // Dropout, pool, ReLU.
      std::vector<Ten3<Real>> d_act(B);
      parallel_for(B, [&](std::int64_t e) {
        if (cache.dropout_on) {
          const Real scale = Real(1) / (Real(1) - cache.dropout_rate);
          auto& d = d_post[e];
          for (std::size_t i = 0; i < d.v.size(); ++i) {
            d.v[i] = bc.drop_mask[e][i] ? d.v[i] * scale : Real(0);
          }
        }
        d_act[e] = Ten3<Real>(T, ref.in_len, Fk);
        maxpool_backward(d_post[e], ref.pool, bc.pool_idx[e], d_act[e]);
        const auto& act = bc.act[e];
        for (std::size_t i = 0; i < d_act[e].v.size(); ++i) {
          if (act.v[i] <= Real(0)) d_act[e].v[i] = Real(0);
        }
      });

      // Batch norm.
      std::vector<Ten3<Real>> d_conv(B);
      for (int e = 0; e < B; ++e) d_conv[e] = Ten3<Real>(T, ref.in_len, Fk);
      bn_backward(bc.conv_out, d_act, bc.stats, model.params.at(ref.gamma),
                  grads.data() + ref.gamma, grads.data() + ref.beta, d_conv);

      // Convolution.
      std::vector<const Ten3<Real>*> ins(B);
      for (int e = 0; e < B; ++e) {
        ins[e] = k == 0 ? &batch[e].branch_inputs[bi] : &blocks[k - 1].post[e];
      }
      conv2d_backward_params(ins, d_conv, ref.dims, grads.data() + ref.w,
                             grads.data() + ref.b);
      if (k > 0) {
        d_post.assign(B, Ten3<Real>());
        parallel_for(B, [&](std::int64_t e) {
          d_post[e] = Ten3<Real>(T, ref.in_len, ref.dims.in_ch);
          conv2d_backward_input(d_conv[e], ref.dims, model.params.at(ref.w), d_post[e]);
        });
      }
    }
  }
}

}  // namespace binsed
