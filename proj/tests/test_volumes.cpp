// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>

#include "binsed/volume.hpp"
#include "test_util.hpp"

using namespace binsed;

namespace {

FeatureMatrix random_matrix(int rows, int cols, Rng& rng) {
  FeatureMatrix m(rows, cols);
  for (auto& v : m.data) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  return m;
}

FeatureVolume random_volume(int t, int l, int c, Rng& rng,
                            FeatureType type = FeatureType::mel) {
  FeatureVolume v(t, l, c, type, 0.02);
  for (auto& x : v.data) x = static_cast<float>(rng.uniform(-5.0, 5.0));
  return v;
}

}  // namespace

TEST_CASE("stacking layers two matrices into T x L x 2") {
  Rng rng(1);
  const auto a = random_matrix(50, 40, rng);
  const auto b = random_matrix(50, 40, rng);
  const auto vol = stack_channels({a, b}, FeatureType::mel, 0.02);
  CHECK(vol.frames == 50);
  CHECK(vol.length == 40);
  CHECK(vol.layers == 2);
  for (int t = 0; t < 50; ++t) {
    for (int l = 0; l < 40; ++l) {
      CHECK(vol.at(t, l, 0) == a.at(t, l));
      CHECK(vol.at(t, l, 1) == b.at(t, l));
    }
  }

  SUBCASE("slicing a frame returns every channel's features for that frame") {
    const int t = 17;
    for (int l = 0; l < 40; ++l) {
      CHECK(vol.at(t, l, 0) == a.at(t, l));
      CHECK(vol.at(t, l, 1) == b.at(t, l));
    }
  }
}

TEST_CASE("single matrix stacks to a one-layer volume") {
  Rng rng(2);
  const auto a = random_matrix(10, 8, rng);
  const auto vol = stack_channels({a}, FeatureType::mel, 0.02);
  CHECK(vol.layers == 1);
}

TEST_CASE("concatenation is channel-major and invertible") {
  Rng rng(3);
  const auto a = random_matrix(50, 40, rng);
  const auto b = random_matrix(50, 40, rng);
  const auto cat = concat_channels({a, b});
  CHECK(cat.rows == 50);
  CHECK(cat.cols == 80);
  for (int t = 0; t < 50; ++t) {
    for (int l = 0; l < 40; ++l) {
      CHECK(cat.at(t, l) == a.at(t, l));
      CHECK(cat.at(t, 40 + l) == b.at(t, l));
    }
  }

  SUBCASE("single input is the identity") {
    const auto one = concat_channels({a});
    CHECK(one.cols == 40);
    CHECK(one.data == a.data);
  }
}

TEST_CASE("stack and concat hold the same multiset of values") {
  Rng rng(4);
  const auto a = random_matrix(30, 20, rng);
  const auto b = random_matrix(30, 20, rng);
  const auto vol = stack_channels({a, b}, FeatureType::mel, 0.02);
  const auto cat = concat_channels({a, b});
  auto x = vol.data;
  auto y = cat.data;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  CHECK(x == y);

  SUBCASE("volume_to_concat matches concat_channels") {
    const auto cat2 = volume_to_concat(vol);
    CHECK(cat2.data == cat.data);
  }
}

TEST_CASE("shape mismatches are rejected") {
  Rng rng(5);
  const auto a = random_matrix(10, 8, rng);
  const auto b = random_matrix(10, 9, rng);
  CHECK_THROWS_AS(stack_channels({a, b}, FeatureType::mel, 0.02), ValidationError);
  CHECK_THROWS_AS(concat_channels({a, b}), ValidationError);
}

TEST_CASE("normalizer") {
  Rng rng(6);

  SUBCASE("constant features normalize to zero instead of blowing up") {
    FeatureVolume v(100, 4, 2, FeatureType::tdoa, 0.02);
    std::fill(v.data.begin(), v.data.end(), 7.25f);
    const auto stats = fit_normalizer({&v});
    const auto out = apply_normalizer(v, stats);
    for (float x : out.data) CHECK(x == 0.0f);
  }

  SUBCASE("fitting set normalizes to zero mean") {
    std::vector<FeatureVolume> vols;
    for (int i = 0; i < 3; ++i) vols.push_back(random_volume(200, 6, 2, rng));
    std::vector<const FeatureVolume*> ptrs;
    for (const auto& v : vols) ptrs.push_back(&v);
    const auto stats = fit_normalizer(ptrs);

    std::vector<double> sums(12, 0.0);
    std::int64_t frames = 0;
    for (const auto& v : vols) {
      const auto norm = apply_normalizer(v, stats);
      frames += norm.frames;
      for (int t = 0; t < norm.frames; ++t) {
        for (int l = 0; l < 6; ++l) {
          for (int c = 0; c < 2; ++c) sums[l * 2 + c] += norm.at(t, l, c);
        }
      }
    }
    for (double s : sums) CHECK(std::abs(s / static_cast<double>(frames)) < 1e-5);
  }

  SUBCASE("normalization round-trips") {
    const auto v = random_volume(80, 5, 3, rng, FeatureType::tdoa);
    const auto v2 = random_volume(60, 5, 3, rng, FeatureType::tdoa);
    const auto stats = fit_normalizer({&v, &v2});
    const auto back = invert_normalizer(apply_normalizer(v, stats), stats);
    for (std::size_t i = 0; i < v.data.size(); ++i) {
      CHECK(back.data[i] == doctest::Approx(v.data[i]).epsilon(1e-4));
    }
  }

  SUBCASE("empty or too-small training sets rejected") {
    CHECK_THROWS_AS(fit_normalizer({}), ValidationError);
    FeatureVolume tiny(1, 4, 2, FeatureType::mel, 0.02);
    CHECK_THROWS_AS(fit_normalizer({&tiny}), ValidationError);
  }

  SUBCASE("mismatched stats rejected") {
    const auto v = random_volume(10, 4, 2, rng);
    const auto w = random_volume(10, 5, 2, rng);
    const auto stats = fit_normalizer({&v, &v});
    CHECK_THROWS_AS(apply_normalizer(w, stats), ValidationError);
  }
}

TEST_CASE("volume serialization") {
  TempDir dir("volumes");
  Rng rng(7);

  SUBCASE("round trip is bit exact") {
    const auto v = random_volume(50, 40, 2, rng);
    write_volume(dir.file("v.fv"), v);
    const auto back = read_volume(dir.file("v.fv"));
    CHECK(back.frames == v.frames);
    CHECK(back.length == v.length);
    CHECK(back.layers == v.layers);
    CHECK(back.type == v.type);
    CHECK(back.hop == doctest::Approx(v.hop).epsilon(1e-9));
    REQUIRE(back.data.size() == v.data.size());
    for (std::size_t i = 0; i < v.data.size(); ++i) REQUIRE(back.data[i] == v.data[i]);
  }

  SUBCASE("corrupted magic is a format error") {
    const auto v = random_volume(5, 4, 2, rng);
    write_volume(dir.file("m.fv"), v);
    auto bytes = read_text(dir.file("m.fv"));
    bytes[0] = 'X';
    write_text(dir.file("m.fv"), bytes);
    CHECK_THROWS_AS(read_volume(dir.file("m.fv")), FormatError);
  }

  SUBCASE("truncated payload is an I/O error") {
    const auto v = random_volume(5, 4, 2, rng);
    write_volume(dir.file("t.fv"), v);
    auto bytes = read_text(dir.file("t.fv"));
    bytes.resize(bytes.size() - 7);
    write_text(dir.file("t.fv"), bytes);
    CHECK_THROWS_AS(read_volume(dir.file("t.fv")), IoError);
  }

  SUBCASE("header/payload disagreement is an I/O error") {
    const auto v = random_volume(5, 4, 2, rng);
    write_volume(dir.file("h.fv"), v);
    auto bytes = read_text(dir.file("h.fv"));
    bytes[8] = 9;  // bump the frame count, payload now too short
    write_text(dir.file("h.fv"), bytes);
    CHECK_THROWS_AS(read_volume(dir.file("h.fv")), IoError);
  }
}
