// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace binsed {

/// Bad arguments, inconsistent shapes, config/file content that violates a
/// contract. Mapped to process exit code 1 by the CLI.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing files, short reads, failed writes. Mapped to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally broken or unsupported file contents (a subtype of I/O
/// failures for exit-code purposes).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

// ---------------------------------------------------------------------------
// Threading.
//
// All parallel loops in this project write disjoint outputs and keep every
// accumulation in a fixed serial order inside one task, so results are
// bit-identical for any thread count. thread_count() == 0 selects the strict
// serial path (no OpenMP region is entered at all).
// ---------------------------------------------------------------------------

int thread_count();
void set_thread_count(int n);
int hardware_threads();

template <class F>
void parallel_for(std::int64_t n, F&& f) {
  const int k = thread_count();
  if (k <= 1 || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) num_threads(k)
  for (std::int64_t i = 0; i < n; ++i) f(i);
#else
  for (std::int64_t i = 0; i < n; ++i) f(i);
#endif
}

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// mt19937_64 is fully specified by the standard; the value derivations below
// avoid std::uniform_*_distribution, whose output is implementation-defined.
// Identical seeds therefore give identical streams on every platform.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [lo, hi], both ends inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller (spare value cached).
  double normal();

  /// Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent stream derived from this generator's seed and `stream`.
  Rng fork(std::uint64_t stream) const;

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::string format_double(double v, int precision);

}  // namespace binsed
