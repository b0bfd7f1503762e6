// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0
//
// Kernel benchmarks: the naive serial reference implementations against the
// optimized (and OpenMP-parallel) kernels, with a numerical agreement column
// so the speedups are known to be computing the same thing.
//
//   ./binsed_bench [threads]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "binsed/dsp.hpp"
#include "binsed/model.hpp"
#include "binsed/spatial.hpp"
#include "binsed/synth.hpp"
#include "reference.hpp"

using namespace binsed;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void print_row(const char* name, double ref_ms, double opt_ms, double max_diff) {
  std::printf("%-34s %10.2f %10.2f %8.1fx %12.3e\n", name, ref_ms, opt_ms, ref_ms / opt_ms,
              max_diff);
}

void bench_dft() {
  const int n = 4096;
  Rng rng(1);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);

  auto t0 = Clock::now();
  const auto want = reference::naive_dft(x);
  const double ref_ms = ms_since(t0);

  const Fft fft(n);
  t0 = Clock::now();
  StftFrame got;
  for (int rep = 0; rep < 50; ++rep) got = fft.real_forward(x, 0);
  const double opt_ms = ms_since(t0) / 50.0;

  double diff = 0.0;
  for (int k = 0; k <= n / 2; ++k) diff = std::max(diff, std::abs(got.coefficients[k] - want[k]));
  print_row("dft 4096 (naive vs radix-2)", ref_ms, opt_ms, diff);
}

void bench_gcc() {
  const int n = 8192;
  Rng rng(2);
  std::vector<double> f1(n / 2), f2(n / 2);
  for (auto& v : f1) v = rng.uniform(-0.5, 0.5);
  for (std::size_t i = 5; i < f2.size(); ++i) f2[i] = f1[i - 5];

  auto t0 = Clock::now();
  std::vector<double> ones(n / 2 + 1, 1.0);
  const auto want = reference::naive_gcc_phat(f1, f2, ones, n, 30);
  const double ref_ms = ms_since(t0);

  const Fft fft(n);
  const auto bank = build_mel_filterbank(1, n, 44100, 0.0, 0.0, FilterShape::rectangular);
  t0 = Clock::now();
  GccSpectrum gcc;
  for (int rep = 0; rep < 20; ++rep) {
    const auto s1 = fft.real_forward(f1, 0);
    const auto s2 = fft.real_forward(f2, 0);
    gcc = gcc_phat(s1, s2, bank, 30);
  }
  const double opt_ms = ms_since(t0) / 20.0;

  double diff = 0.0;
  for (int i = 0; i <= 60; ++i) diff = std::max(diff, std::abs(gcc.at(0, i - 30) - want[i]));
  print_row("gcc-phat sweep 8192x61 lags", ref_ms, opt_ms, diff);
}

void bench_conv() {
  Rng rng(3);
  const ConvDims d{32, 32, 3, 3};
  Ten3<double> in(400, 20, 32);
  for (auto& v : in.v) v = rng.uniform(-1.0, 1.0);
  std::vector<double> w(d.weight_count()), b(d.filters);
  for (auto& v : w) v = rng.uniform(-0.2, 0.2);
  for (auto& v : b) v = rng.uniform(-0.2, 0.2);

  auto t0 = Clock::now();
  Ten3<double> want;
  reference::naive_conv2d(in, d.filters, 3, 3, w, b, want);
  const double ref_ms = ms_since(t0);

  Ten3<double> out(400, 20, 32);
  set_thread_count(hardware_threads());
  auto t1 = Clock::now();
  for (int rep = 0; rep < 5; ++rep) conv2d_forward(in, d, w.data(), b.data(), out);
  const double opt_ms = ms_since(t1) / 5.0;

  double diff = 0.0;
  for (std::size_t i = 0; i < out.v.size(); ++i) diff = std::max(diff, std::abs(out.v[i] - want.v[i]));
  print_row("conv2d 400x20x32 -> 32 maps", ref_ms, opt_ms, diff);
}

void bench_extractors(int threads) {
  const auto clip = make_delayed_noise_clip(4.0, 44100, 8, 4);
  SpatialConfig cfg;

  set_thread_count(0);
  (void)log_mel_energies(clip, cfg.dsp);  // warm up caches and allocators
  auto t0 = Clock::now();
  const auto mel_serial = log_mel_energies(clip, cfg.dsp);
  const double mel_ref = ms_since(t0);
  t0 = Clock::now();
  const auto tdoa_serial = extract_tdoa(clip, cfg);
  const double tdoa_ref = ms_since(t0);

  set_thread_count(threads);
  t0 = Clock::now();
  const auto mel_par = log_mel_energies(clip, cfg.dsp);
  const double mel_opt = ms_since(t0);
  t0 = Clock::now();
  const auto tdoa_par = extract_tdoa(clip, cfg);
  const double tdoa_opt = ms_since(t0);

  // Frame-parallel loops write disjoint outputs, so the parallel run must be
  // bit-identical to the serial one.
  double mel_diff = 0.0, tdoa_diff = 0.0;
  for (std::size_t i = 0; i < mel_serial.data.size(); ++i) {
    mel_diff = std::max(mel_diff,
                        std::abs(static_cast<double>(mel_serial.data[i]) - mel_par.data[i]));
  }
  for (std::size_t i = 0; i < tdoa_serial.data.size(); ++i) {
    tdoa_diff = std::max(tdoa_diff,
                         std::abs(static_cast<double>(tdoa_serial.data[i]) - tdoa_par.data[i]));
  }
  print_row("log-mel 4 s stereo (1 vs N thr)", mel_ref, mel_opt, mel_diff);
  print_row("tdoa 4 s stereo (1 vs N thr)", tdoa_ref, tdoa_opt, tdoa_diff);
}

void bench_training_step(int threads) {
  ModelConfig mc;
  mc.branches.push_back(make_branch_spec("mel", LayeringMode::volume, 32));
  mc.lstm_units = 64;
  mc.class_list = {"a", "b"};
  Model<float> model(mc);
  Rng init(5);
  model.init_params(init);

  Rng rng(6);
  std::vector<SequenceBatchItem<float>> batch;
  for (int e = 0; e < 8; ++e) {
    SequenceBatchItem<float> item;
    Ten3<float> in(100, 40, 2);
    for (auto& v : in.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    item.branch_inputs.push_back(std::move(in));
    item.targets = Mat<float>(100, 2);
    for (auto& v : item.targets.v) v = rng.uniform() < 0.3 ? 1.0f : 0.0f;
    item.frame_mask.assign(100, 1);
    batch.push_back(std::move(item));
  }

  auto step = [&]() {
    ForwardCache<float> cache;
    Rng fwd(7);
    forward_train(model, batch, 0.0f, fwd, cache, false);
    std::vector<float> grads(model.params.data.size());
    backward(model, batch, cache, grads);
    return grads;
  };

  set_thread_count(0);
  (void)step();  // warm up
  auto t0 = Clock::now();
  const auto g_serial = step();
  const double ref_ms = ms_since(t0);

  set_thread_count(threads);
  t0 = Clock::now();
  const auto g_par = step();
  const double opt_ms = ms_since(t0);

  double diff = 0.0;
  for (std::size_t i = 0; i < g_serial.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(g_serial[i]) - g_par[i]));
  }
  print_row("fwd+bwd batch 8x100 (1 vs N thr)", ref_ms, opt_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : hardware_threads();
  std::printf("threads for parallel runs: %d\n\n", threads);
  std::printf("%-34s %10s %10s %9s %12s\n", "kernel", "ref ms", "opt ms", "speedup", "max diff");

  set_thread_count(threads);
  bench_dft();
  bench_gcc();
  bench_conv();
  bench_extractors(threads);
  bench_training_step(threads);
  return 0;
}
