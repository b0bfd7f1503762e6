// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "binsed/audio_io.hpp"

namespace binsed {

/// Active-class index sets, one per fixed-length segment.
using SegmentSets = std::vector<std::vector<int>>;

/// Pooled segment counts. s/d/i are accumulated per segment before summing,
/// so s = sum_k min(FN(k), FP(k)) and so on.
struct SegmentCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t n = 0;  // reference events per segment, summed
  std::int64_t s = 0;
  std::int64_t d = 0;
  std::int64_t i = 0;
  std::int64_t segments = 0;

  void add_segment(const std::vector<int>& ref, const std::vector<int>& sys);
  void merge(const SegmentCounts& other);
};

/// Collapses a frame roll to per-segment active sets. segment_length must be
/// a positive integer multiple of the roll hop; the final partial segment is
/// kept.
SegmentSets roll_to_segments(const EventRoll& roll, double segment_length);

/// Pairwise segment counting; the shorter side is padded with empty sets.
SegmentCounts count_segments(const SegmentSets& ref, const SegmentSets& sys);

/// F = 2*TP / (2*TP + FP + FN); defined as 0 when the denominator is 0.
double f_score(const SegmentCounts& counts);

/// ER = (S + D + I) / N. Throws if the reference holds no events at all.
double error_rate(const SegmentCounts& counts);

struct ContextReport {
  std::string context;
  SegmentCounts counts;
  double f = 0.0;
  std::optional<double> er;  // absent when the context has no reference events
};

struct MetricReport {
  std::vector<ContextReport> contexts;
  double overall_f = 0.0;   // unweighted mean over contexts
  double overall_er = 0.0;  // unweighted mean over contexts with references
  SegmentCounts totals;
  std::vector<std::string> warnings;
};

struct ScoredRecording {
  std::string id;
  std::string context;
  EventRoll reference;
  EventRoll system;
};

/// Pools counts per context, applies the metric formulas per context and
/// averages the context results without weighting. Contexts without any
/// reference events are excluded from the error-rate average (flagged in
/// warnings). `known_contexts` comes from the dataset manifest; a recording
/// in an unknown context is an error.
MetricReport evaluate_by_context(const std::vector<ScoredRecording>& recordings,
                                 const std::vector<std::string>& known_contexts,
                                 double segment_length = 1.0);

std::string format_report_table(const MetricReport& report);
std::string format_report_kv(const MetricReport& report);

}  // namespace binsed
