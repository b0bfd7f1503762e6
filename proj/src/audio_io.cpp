// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include "binsed/audio_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

namespace binsed {

namespace {

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

double parse_seconds(std::string_view field, const std::filesystem::path& path, int line,
                     const char* what) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(path.string() + ":" + std::to_string(line) + ": non-numeric " + what +
                      " field '" + std::string(field) + "'");
  }
  return value;
}

std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

}  // namespace

void AudioClip::validate() const {
  if (channels() < 1 || channels() > 2) {
    throw ValidationError("clip '" + id + "': channel count must be 1 or 2");
  }
  if (sample_rate <= 0) throw ValidationError("clip '" + id + "': sample rate must be > 0");
  for (const auto& ch : samples) {
    if (ch.size() != samples[0].size()) {
      throw ValidationError("clip '" + id + "': channels differ in length");
    }
  }
}

AudioClip read_wav(const std::filesystem::path& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path.string());

  unsigned char hdr[12];
  if (!in.read(reinterpret_cast<char*>(hdr), 12)) {
    throw FormatError(path.string() + ": truncated RIFF header");
  }
  if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0) {
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<unsigned char> data;
  bool have_data = false;

  unsigned char chunk[8];
  while (in.read(reinterpret_cast<char*>(chunk), 8)) {
    const std::uint32_t size = read_u32le(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(path.string() + ": fmt chunk too small");
      std::vector<unsigned char> fmt(size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), size)) {
        throw FormatError(path.string() + ": truncated fmt chunk");
      }
      format = read_u16le(fmt.data());
      channels = read_u16le(fmt.data() + 2);
      rate = read_u32le(fmt.data() + 4);
      bits = read_u16le(fmt.data() + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data.resize(size);
      if (size > 0 && !in.read(reinterpret_cast<char*>(data.data()), size)) {
        throw FormatError(path.string() + ": truncated data chunk");
      }
      have_data = true;
    } else {
      in.seekg(size, std::ios::cur);
    }
    if (size & 1) in.seekg(1, std::ios::cur);  // chunks are word-aligned
  }

  if (!have_fmt) throw FormatError(path.string() + ": missing fmt chunk");
  if (!have_data) throw FormatError(path.string() + ": missing data chunk");
  if (format != 1 || bits != 16) {
    throw FormatError(path.string() + ": unsupported encoding (only 16-bit PCM is handled)");
  }
  if (channels != 1 && channels != 2) {
    throw FormatError(path.string() + ": unsupported channel count " + std::to_string(channels));
  }
  if (expected_rate > 0 && static_cast<int>(rate) != expected_rate) {
    throw ValidationError(path.string() + ": sample rate mismatch: file has " +
                          std::to_string(rate) + " Hz, configured rate is " +
                          std::to_string(expected_rate) + " Hz (resampling not supported)");
  }

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = data.size() / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.id = path.string();
  clip.samples.assign(channels, std::vector<float>(frames));
  const float scale = 1.0f / 32768.0f;
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* p = data.data() + (i * channels + c) * 2;
      const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
      clip.samples[c][i] = static_cast<float>(v) * scale;
    }
  }
  clip.validate();
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  clip.validate();
  const int channels = clip.channels();
  const std::size_t frames = clip.length();
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * channels * 2);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32le(out, 36 + data_size);
  out += "WAVE";
  out += "fmt ";
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, static_cast<std::uint16_t>(channels));
  put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate * channels * 2));
  put_u16le(out, static_cast<std::uint16_t>(channels * 2));
  put_u16le(out, 16);
  out += "data";
  put_u32le(out, data_size);

  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double x = static_cast<double>(clip.samples[c][i]) * 32768.0;
      const long n = std::lround(x);
      const auto v = static_cast<std::int16_t>(std::clamp(n, -32768L, 32767L));
      put_u16le(out, static_cast<std::uint16_t>(v));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<EventAnnotation> parse_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file: " + path.string());

  std::vector<EventAnnotation> events;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view sv = trim_cr(raw);
    if (sv.empty()) continue;
    const auto tab1 = sv.find('\t');
    const auto tab2 = tab1 == std::string_view::npos ? tab1 : sv.find('\t', tab1 + 1);
    if (tab1 == std::string_view::npos || tab2 == std::string_view::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line) +
                        ": expected 'onset<TAB>offset<TAB>label'");
    }
    EventAnnotation ev;
    ev.onset = parse_seconds(sv.substr(0, tab1), path, line, "onset");
    ev.offset = parse_seconds(sv.substr(tab1 + 1, tab2 - tab1 - 1), path, line, "offset");
    ev.label = std::string(sv.substr(tab2 + 1));
    if (ev.label.empty()) {
      throw ValidationError(path.string() + ":" + std::to_string(line) + ": empty label");
    }
    if (ev.onset < 0.0) {
      throw ValidationError(path.string() + ":" + std::to_string(line) + ": negative onset");
    }
    if (!(ev.offset > ev.onset)) {
      throw ValidationError(path.string() + ":" + std::to_string(line) +
                            ": offset must be greater than onset");
    }
    events.push_back(std::move(ev));
  }
  return events;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<EventAnnotation>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& ev : events) {
    out << format_double(ev.onset, 6) << '\t' << format_double(ev.offset, 6) << '\t' << ev.label
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

DatasetManifest build_manifest(const std::filesystem::path& root) {
  const auto index = root / "manifest.tsv";
  std::ifstream in(index);
  if (!in) throw IoError("cannot open manifest index: " + index.string());

  DatasetManifest m;
  m.root = root;
  std::set<std::string> seen_audio;
  std::set<int> folds;
  std::set<std::string> contexts;
  std::set<std::string> labels;

  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view sv = trim_cr(raw);
    if (sv.empty()) continue;

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (fields.size() < 3) {
      const auto tab = sv.find('\t', pos);
      if (tab == std::string_view::npos) break;
      fields.emplace_back(sv.substr(pos, tab - pos));
      pos = tab + 1;
    }
    fields.emplace_back(sv.substr(pos));
    if (fields.size() != 4) {
      throw FormatError(index.string() + ":" + std::to_string(line) +
                        ": expected 'audio<TAB>annotation<TAB>context<TAB>fold'");
    }

    ManifestEntry e;
    e.audio_path = fields[0];
    e.annotation_path = fields[1];
    e.context = fields[2];
    const auto& fs = fields[3];
    const auto [ptr, ec] = std::from_chars(fs.data(), fs.data() + fs.size(), e.fold);
    if (ec != std::errc() || ptr != fs.data() + fs.size() || e.fold < 1) {
      throw FormatError(index.string() + ":" + std::to_string(line) + ": bad fold index '" + fs +
                        "'");
    }

    if (!seen_audio.insert(e.audio_path).second) {
      throw ValidationError(index.string() + ":" + std::to_string(line) +
                            ": duplicate audio path '" + e.audio_path + "'");
    }
    if (!std::filesystem::exists(root / e.audio_path)) {
      throw IoError(index.string() + ":" + std::to_string(line) + ": missing audio file '" +
                    (root / e.audio_path).string() + "'");
    }
    if (!std::filesystem::exists(root / e.annotation_path)) {
      throw IoError(index.string() + ":" + std::to_string(line) + ": missing annotation file '" +
                    (root / e.annotation_path).string() + "'");
    }

    folds.insert(e.fold);
    contexts.insert(e.context);
    for (const auto& ev : parse_annotations(root / e.annotation_path)) {
      labels.insert(ev.label);
    }
    m.entries.push_back(std::move(e));
  }

  if (m.entries.empty()) throw ValidationError(index.string() + ": manifest has no entries");

  // Folds must be exactly 1..F.
  int expect = 1;
  for (int f : folds) {
    if (f != expect) {
      throw ValidationError(index.string() + ": fold indices must be contiguous from 1, found gap at " +
                            std::to_string(expect));
    }
    ++expect;
  }
  m.fold_count = static_cast<int>(folds.size());
  m.class_list.assign(labels.begin(), labels.end());
  m.contexts.assign(contexts.begin(), contexts.end());
  return m;
}

EventRoll annotations_to_roll_frames(const std::vector<EventAnnotation>& events,
                                     std::size_t frames,
                                     const std::vector<std::string>& class_list, double hop) {
  if (hop <= 0.0) throw ValidationError("hop must be > 0");
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < class_list.size(); ++k) index[class_list[k]] = k;

  EventRoll roll;
  roll.frames = frames;
  roll.hop = hop;
  roll.class_list = class_list;
  roll.values.assign(frames * class_list.size(), 0);

  for (const auto& ev : events) {
    const auto it = index.find(ev.label);
    if (it == index.end()) {
      throw ValidationError("unknown class '" + ev.label + "' not in class list");
    }
    // Active frames t satisfy t*hop < offset and (t+1)*hop > onset.
    const auto first = static_cast<std::int64_t>(std::floor(ev.onset / hop + 1e-9));
    const auto last = static_cast<std::int64_t>(std::ceil(ev.offset / hop - 1e-9)) - 1;
    for (std::int64_t t = std::max<std::int64_t>(first, 0);
         t <= std::min<std::int64_t>(last, static_cast<std::int64_t>(frames) - 1); ++t) {
      roll.set(static_cast<std::size_t>(t), it->second, 1);
    }
  }
  return roll;
}

EventRoll annotations_to_roll(const std::vector<EventAnnotation>& events, double duration,
                              const std::vector<std::string>& class_list, double hop) {
  if (hop <= 0.0) throw ValidationError("hop must be > 0");
  if (duration < 0.0) throw ValidationError("duration must be >= 0");
  const auto frames = static_cast<std::size_t>(std::ceil(duration / hop - 1e-9));
  return annotations_to_roll_frames(events, frames, class_list, hop);
}

std::vector<EventAnnotation> roll_to_events(const EventRoll& roll) {
  std::vector<EventAnnotation> events;
  for (std::size_t k = 0; k < roll.classes(); ++k) {
    std::size_t t = 0;
    while (t < roll.frames) {
      if (roll.at(t, k)) {
        std::size_t end = t;
        while (end + 1 < roll.frames && roll.at(end + 1, k)) ++end;
        EventAnnotation ev;
        ev.onset = static_cast<double>(t) * roll.hop;
        ev.offset = static_cast<double>(end + 1) * roll.hop;
        ev.label = roll.class_list[k];
        events.push_back(std::move(ev));
        t = end + 1;
      } else {
        ++t;
      }
    }
  }
  return events;
}

}  // namespace binsed
