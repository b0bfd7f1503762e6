// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "binsed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace binsed {

void SegmentCounts::add_segment(const std::vector<int>& ref, const std::vector<int>& sys) {
  std::int64_t seg_tp = 0;
  for (int c : sys) {
    if (std::find(ref.begin(), ref.end(), c) != ref.end()) ++seg_tp;
  }
  const auto seg_fp = static_cast<std::int64_t>(sys.size()) - seg_tp;
  const auto seg_fn = static_cast<std::int64_t>(ref.size()) - seg_tp;
  tp += seg_tp;
  fp += seg_fp;
  fn += seg_fn;
  n += static_cast<std::int64_t>(ref.size());
  s += std::min(seg_fn, seg_fp);
  d += std::max<std::int64_t>(0, seg_fn - seg_fp);
  i += std::max<std::int64_t>(0, seg_fp - seg_fn);
  ++segments;
}

void SegmentCounts::merge(const SegmentCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  n += other.n;
  s += other.s;
  d += other.d;
  i += other.i;
  segments += other.segments;
}

SegmentSets roll_to_segments(const EventRoll& roll, double segment_length) {
  if (!(segment_length > 0.0) || roll.hop <= 0.0) {
    throw ValidationError("roll_to_segments: segment length and hop must be positive");
  }
  const double ratio = segment_length / roll.hop;
  const auto frames_per_segment = static_cast<std::int64_t>(std::lround(ratio));
  if (frames_per_segment < 1 || std::abs(ratio - static_cast<double>(frames_per_segment)) > 1e-6) {
    throw ValidationError("roll_to_segments: segment length must be a multiple of the hop");
  }

  const std::size_t segments =
      (roll.frames + static_cast<std::size_t>(frames_per_segment) - 1) /
      static_cast<std::size_t>(frames_per_segment);
  SegmentSets sets(segments);
  for (std::size_t seg = 0; seg < segments; ++seg) {
    const std::size_t t0 = seg * static_cast<std::size_t>(frames_per_segment);
    const std::size_t t1 =
        std::min(roll.frames, t0 + static_cast<std::size_t>(frames_per_segment));
    for (std::size_t k = 0; k < roll.classes(); ++k) {
      for (std::size_t t = t0; t < t1; ++t) {
        if (roll.at(t, k)) {
          sets[seg].push_back(static_cast<int>(k));
          break;
        }
      }
    }
  }
  return sets;
}

SegmentCounts count_segments(const SegmentSets& ref, const SegmentSets& sys) {
  SegmentCounts counts;
  const std::size_t total = std::max(ref.size(), sys.size());
  static const std::vector<int> kEmpty;
  for (std::size_t k = 0; k < total; ++k) {
    counts.add_segment(k < ref.size() ? ref[k] : kEmpty, k < sys.size() ? sys[k] : kEmpty);
  }
  return counts;
}

double f_score(const SegmentCounts& counts) {
  const std::int64_t denom = 2 * counts.tp + counts.fp + counts.fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(counts.tp) / static_cast<double>(denom);
}

double error_rate(const SegmentCounts& counts) {
  if (counts.n == 0) {
    throw ValidationError("error_rate: undefined, reference contains no events");
  }
  return static_cast<double>(counts.s + counts.d + counts.i) / static_cast<double>(counts.n);
}

MetricReport evaluate_by_context(const std::vector<ScoredRecording>& recordings,
                                 const std::vector<std::string>& known_contexts,
                                 double segment_length) {
  if (recordings.empty()) throw ValidationError("evaluate_by_context: nothing to score");
  const std::set<std::string> known(known_contexts.begin(), known_contexts.end());

  std::map<std::string, SegmentCounts> per_context;
  for (const auto& rec : recordings) {
    if (!known.empty() && known.find(rec.context) == known.end()) {
      throw ValidationError("recording '" + rec.id + "' has context '" + rec.context +
                            "' not present in the manifest contexts");
    }
    const auto ref = roll_to_segments(rec.reference, segment_length);
    const auto sys = roll_to_segments(rec.system, segment_length);
    per_context[rec.context].merge(count_segments(ref, sys));
  }

  MetricReport report;
  double f_sum = 0.0;
  double er_sum = 0.0;
  int er_contexts = 0;
  for (const auto& [name, counts] : per_context) {
    ContextReport ctx;
    ctx.context = name;
    ctx.counts = counts;
    ctx.f = f_score(counts);
    if (counts.n > 0) {
      ctx.er = error_rate(counts);
      er_sum += *ctx.er;
      ++er_contexts;
    } else {
      report.warnings.push_back("context '" + name +
                                "' has no reference events; excluded from the ER average");
    }
    f_sum += ctx.f;
    report.totals.merge(counts);
    report.contexts.push_back(std::move(ctx));
  }
  report.overall_f = f_sum / static_cast<double>(report.contexts.size());
  report.overall_er = er_contexts > 0 ? er_sum / er_contexts : 0.0;
  return report;
}

std::string format_report_table(const MetricReport& report) {
  std::ostringstream out;
  out << "context\tF\tER\tS\tD\tI\tN\n";
  for (const auto& ctx : report.contexts) {
    out << ctx.context << '\t' << format_double(ctx.f, 6) << '\t'
        << (ctx.er ? format_double(*ctx.er, 6) : std::string("n/a")) << '\t' << ctx.counts.s
        << '\t' << ctx.counts.d << '\t' << ctx.counts.i << '\t' << ctx.counts.n << '\n';
  }
  out << "overall\t" << format_double(report.overall_f, 6) << '\t'
      << format_double(report.overall_er, 6) << '\t' << report.totals.s << '\t'
      << report.totals.d << '\t' << report.totals.i << '\t' << report.totals.n << '\n';
  for (const auto& w : report.warnings) out << "# warning: " << w << '\n';
  return out.str();
}

std::string format_report_kv(const MetricReport& report) {
  std::ostringstream out;
  out << "overall.F=" << format_double(report.overall_f, 6) << '\n';
  out << "overall.ER=" << format_double(report.overall_er, 6) << '\n';
  for (const auto& ctx : report.contexts) {
    out << "context." << ctx.context << ".F=" << format_double(ctx.f, 6) << '\n';
    if (ctx.er) {
      out << "context." << ctx.context << ".ER=" << format_double(*ctx.er, 6) << '\n';
    }
    out << "context." << ctx.context << ".S=" << ctx.counts.s << '\n';
    out << "context." << ctx.context << ".D=" << ctx.counts.d << '\n';
    out << "context." << ctx.context << ".I=" << ctx.counts.i << '\n';
    out << "context." << ctx.context << ".N=" << ctx.counts.n << '\n';
  }
  return out.str();
}

}  // namespace binsed
