// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "binsed/audio_io.hpp"
#include "test_util.hpp"

using namespace binsed;

namespace {

AudioClip make_clip(int channels, std::size_t frames, int rate = 44100) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.id = "test";
  clip.samples.assign(channels, std::vector<float>(frames, 0.0f));
  return clip;
}

}  // namespace

TEST_CASE("wav round trip preserves header fields and int16 samples exactly") {
  TempDir dir("wav_roundtrip");
  Rng rng(42);
  AudioClip clip = make_clip(2, 44100);
  for (auto& ch : clip.samples) {
    for (auto& s : ch) {
      s = static_cast<float>(rng.uniform_int(-32768, 32767)) / 32768.0f;
    }
  }
  write_wav(dir.file("a.wav"), clip);
  const AudioClip back = read_wav(dir.file("a.wav"));

  CHECK(back.channels() == 2);
  CHECK(back.sample_rate == 44100);
  CHECK(back.length() == 44100);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < back.length(); ++i) {
      REQUIRE(back.samples[c][i] == clip.samples[c][i]);  // bit-exact
    }
  }
}

TEST_CASE("wav extreme sample values") {
  TempDir dir("wav_extremes");
  AudioClip clip = make_clip(1, 4);
  clip.samples[0] = {-1.0f, 32767.0f / 32768.0f, 0.0f, -0.5f};
  write_wav(dir.file("e.wav"), clip);
  const AudioClip back = read_wav(dir.file("e.wav"));
  CHECK(back.samples[0][0] == -1.0f);
  CHECK(back.samples[0][1] == 32767.0f / 32768.0f);  // 0.999969482421875 exactly
  CHECK(back.samples[0][2] == 0.0f);
}

TEST_CASE("all-zero payload maps to exact zeros") {
  TempDir dir("wav_zero");
  write_wav(dir.file("z.wav"), make_clip(2, 100));
  const AudioClip back = read_wav(dir.file("z.wav"));
  for (const auto& ch : back.samples) {
    for (float s : ch) CHECK(s == 0.0f);
  }
}

TEST_CASE("wav error paths") {
  TempDir dir("wav_errors");

  SUBCASE("missing file") { CHECK_THROWS_AS(read_wav(dir.file("nope.wav")), IoError); }

  SUBCASE("malformed header") {
    write_text(dir.file("bad.wav"), "definitely not a RIFF container at all");
    CHECK_THROWS_AS(read_wav(dir.file("bad.wav")), FormatError);
  }

  SUBCASE("sample rate mismatch is rejected without resampling") {
    write_wav(dir.file("r.wav"), make_clip(1, 10, 22050));
    CHECK_THROWS_AS(read_wav(dir.file("r.wav"), 44100), ValidationError);
    CHECK_NOTHROW(read_wav(dir.file("r.wav"), 22050));
  }
}

TEST_CASE("annotation parsing") {
  TempDir dir("ann");

  SUBCASE("plain fields map through") {
    write_text(dir.file("a.txt"), "0.50\t2.10\tspeech\n3\t4.5\tcar horn\n");
    const auto events = parse_annotations(dir.file("a.txt"));
    REQUIRE(events.size() == 2);
    CHECK(events[0].onset == doctest::Approx(0.5));
    CHECK(events[0].offset == doctest::Approx(2.1));
    CHECK(events[0].label == "speech");
    CHECK(events[1].label == "car horn");
  }

  SUBCASE("empty file gives empty list") {
    write_text(dir.file("empty.txt"), "");
    CHECK(parse_annotations(dir.file("empty.txt")).empty());
  }

  SUBCASE("offset before onset names the line") {
    write_text(dir.file("bad.txt"), "3.0\t1.0\tcar\n");
    try {
      parse_annotations(dir.file("bad.txt"));
      FAIL("expected validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find(":1") != std::string::npos);
    }
  }

  SUBCASE("non-numeric field is a parse error with the line number") {
    write_text(dir.file("nan.txt"), "0.0\t1.0\tok\nx\t2.0\tbad\n");
    try {
      parse_annotations(dir.file("nan.txt"));
      FAIL("expected format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
}

TEST_CASE("manifest build and validation") {
  TempDir dir("manifest");
  write_wav(dir.file("a.wav"), make_clip(2, 1000));
  write_wav(dir.file("b.wav"), make_clip(2, 1000));
  write_text(dir.file("a.txt"), "0.0\t1.0\tspeech\n");
  write_text(dir.file("b.txt"), "0.0\t1.0\tcar\n");

  SUBCASE("class list is the sorted union") {
    write_text(dir.file("manifest.tsv"), "a.wav\ta.txt\tstreet\t1\nb.wav\tb.txt\thome\t2\n");
    const auto m = build_manifest(dir.path);
    CHECK(m.class_list == std::vector<std::string>{"car", "speech"});
    CHECK(m.contexts == std::vector<std::string>{"home", "street"});
    CHECK(m.fold_count == 2);
    CHECK(m.entries.size() == 2);
  }

  SUBCASE("missing annotation file is an I/O error naming the entry") {
    write_text(dir.file("manifest.tsv"), "a.wav\tmissing.txt\tstreet\t1\n");
    try {
      build_manifest(dir.path);
      FAIL("expected io error");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("missing.txt") != std::string::npos);
    }
  }

  SUBCASE("duplicate audio path rejected") {
    write_text(dir.file("manifest.tsv"), "a.wav\ta.txt\tstreet\t1\na.wav\tb.txt\tstreet\t2\n");
    CHECK_THROWS_AS(build_manifest(dir.path), ValidationError);
  }

  SUBCASE("folds must be contiguous from 1") {
    write_text(dir.file("manifest.tsv"), "a.wav\ta.txt\tstreet\t1\nb.wav\tb.txt\tstreet\t3\n");
    CHECK_THROWS_AS(build_manifest(dir.path), ValidationError);
  }
}

TEST_CASE("annotation to roll frame activity") {
  const std::vector<std::string> classes{"car", "speech"};

  SUBCASE("one-second event fills frames 0..49 at the 20 ms hop") {
    const auto roll =
        annotations_to_roll({{0.0, 1.0, "speech"}}, 1.0, classes, 0.02);
    REQUIRE(roll.frames == 50);
    for (std::size_t t = 0; t < 50; ++t) {
      CHECK(roll.at(t, 1) == 1);
      CHECK(roll.at(t, 0) == 0);
    }
  }

  SUBCASE("boundary event touches only its final frame") {
    const auto roll = annotations_to_roll({{0.99, 1.0, "car"}}, 1.0, classes, 0.02);
    for (std::size_t t = 0; t < 49; ++t) CHECK(roll.at(t, 0) == 0);
    CHECK(roll.at(49, 0) == 1);
  }

  SUBCASE("overlapping events of different classes both stay active") {
    const auto roll = annotations_to_roll({{0.0, 0.6, "car"}, {0.4, 1.0, "speech"}}, 1.0,
                                          classes, 0.02);
    CHECK(roll.at(25, 0) == 1);  // 0.5 s: both
    CHECK(roll.at(25, 1) == 1);
  }

  SUBCASE("unknown label") {
    CHECK_THROWS_AS(annotations_to_roll({{0.0, 1.0, "dog"}}, 1.0, classes, 0.02),
                    ValidationError);
  }

  SUBCASE("trailing partial frame is kept") {
    const auto roll = annotations_to_roll({}, 1.01, classes, 0.02);
    CHECK(roll.frames == 51);
  }
}

TEST_CASE("roll round trip recovers events within one hop") {
  const std::vector<std::string> classes{"a", "b"};
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<EventAnnotation> events;
    const int n = static_cast<int>(rng.uniform_int(1, 4));
    for (int i = 0; i < n; ++i) {
      const double onset = rng.uniform(0.0, 8.0);
      const double dur = rng.uniform(0.1, 2.0);
      events.push_back({onset, onset + dur, classes[rng.uniform_int(0, 1)]});
    }
    const double hop = 0.02;
    const auto roll = annotations_to_roll(events, 10.0, classes, hop);
    const auto back = roll_to_events(roll);

    // Every original event must have a recovered run matching within +-hop.
    for (const auto& ev : events) {
      bool matched = false;
      for (const auto& rec : back) {
        if (rec.label == ev.label && rec.onset <= ev.onset + hop + 1e-9 &&
            rec.offset >= ev.offset - hop - 1e-9) {
          matched = true;
          break;
        }
      }
      CHECK(matched);
    }
  }
}

TEST_CASE("adding an event never clears an active cell") {
  const std::vector<std::string> classes{"a", "b"};
  Rng rng(9);
  std::vector<EventAnnotation> events;
  for (int i = 0; i < 6; ++i) {
    const double onset = rng.uniform(0.0, 4.0);
    events.push_back({onset, onset + rng.uniform(0.05, 1.0), classes[rng.uniform_int(0, 1)]});
    const auto with = annotations_to_roll(events, 5.0, classes, 0.02);
    std::vector<EventAnnotation> without(events.begin(), events.end() - 1);
    const auto prev = annotations_to_roll(without, 5.0, classes, 0.02);
    for (std::size_t t = 0; t < prev.frames; ++t) {
      for (std::size_t k = 0; k < 2; ++k) {
        if (prev.at(t, k)) CHECK(with.at(t, k) == 1);
      }
    }
  }
}
