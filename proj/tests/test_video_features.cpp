#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "lamedet/rng.hpp"
#include "lamedet/video_features.hpp"

using namespace lamedet;
using namespace lamedet::vf;

namespace {

ColorClip constant_clip(std::size_t frames, int w, int h, uint8_t r, uint8_t g, uint8_t b,
                        double fps = 30.0) {
  ColorClip clip;
  clip.frame_rate = fps;
  for (std::size_t i = 0; i < frames; ++i) clip.frames.push_back(ColorFrame::filled(w, h, r, g, b));
  return clip;
}

ColorClip random_clip(std::size_t frames, int w, int h, uint64_t seed, double fps = 30.0) {
  Rng rng(seed);
  ColorClip clip;
  clip.frame_rate = fps;
  for (std::size_t i = 0; i < frames; ++i) {
    ColorFrame f = ColorFrame::filled(w, h, 0, 0, 0);
    for (auto& v : f.rgb) v = static_cast<uint8_t>(rng.range(0, 255));
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

}  // namespace

TEST_CASE("preprocess resizes, halves the frame count and the rate") {
  SECTION("even frame count") {
    const ColorClip out = preprocess(constant_clip(30, 64, 48, 10, 20, 30));
    CHECK(out.size() == 15);
    CHECK(out.width() == 340);
    CHECK(out.height() == 256);
    CHECK(out.frame_rate == 15.0);
  }
  SECTION("odd frame count keeps indices 0,2,...,n-1") {
    const ColorClip out = preprocess(constant_clip(31, 16, 16, 0, 0, 0));
    CHECK(out.size() == 16);
  }
  SECTION("single frame") {
    const ColorClip out = preprocess(constant_clip(1, 20, 20, 5, 5, 5, 24.0));
    CHECK(out.size() == 1);
    CHECK(out.width() == 340);
    CHECK(out.frame_rate == 12.0);
  }
  SECTION("empty clip is an error") {
    ColorClip empty;
    CHECK_THROWS_AS(preprocess(empty), Error);
  }
  SECTION("spatial idempotence, rate halving is not idempotent") {
    const ColorClip once = preprocess(constant_clip(20, 32, 32, 1, 2, 3, 30.0));
    const ColorClip twice = preprocess(once);
    CHECK(twice.width() == 340);
    CHECK(twice.height() == 256);
    CHECK(once.frame_rate == 15.0);
    CHECK(twice.frame_rate == 7.5);
    CHECK(twice.size() == 5);
  }
}

TEST_CASE("pathway sampling") {
  SECTION("n = 64 is the identity on fast, every 8th on slow") {
    const PathwaySample s = sample_pathways(constant_clip(64, 16, 16, 0, 0, 0));
    for (int i = 0; i < kFastFrames; ++i) CHECK(s.fast[static_cast<std::size_t>(i)] == i);
    REQUIRE(s.slow.size() == 8);
    for (int j = 0; j < kSlowFrames; ++j) CHECK(s.slow[static_cast<std::size_t>(j)] == 8 * j);
  }
  SECTION("n = 1 duplicates the only frame") {
    const PathwaySample s = sample_pathways(constant_clip(1, 16, 16, 0, 0, 0));
    for (int idx : s.fast) CHECK(idx == 0);
    for (int idx : s.slow) CHECK(idx == 0);
  }
  SECTION("n = 150 follows the rounded index formula") {
    const PathwaySample s = sample_pathways(constant_clip(150, 16, 16, 0, 0, 0));
    for (int i = 0; i < kFastFrames; ++i) {
      CHECK(s.fast[static_cast<std::size_t>(i)] == std::lround(i * 149.0 / 63.0));
    }
  }
  SECTION("indices are monotone and in bounds for all n") {
    for (std::size_t n = 1; n <= 200; n += 3) {
      const PathwaySample s = sample_pathways(constant_clip(n, 16, 16, 0, 0, 0));
      int prev = 0;
      for (int idx : s.fast) {
        CHECK(idx >= prev);
        CHECK(idx >= 0);
        CHECK(idx < static_cast<int>(n));
        prev = idx;
      }
    }
  }
  SECTION("empty clip is an error") {
    ColorClip empty;
    CHECK_THROWS_AS(sample_pathways(empty), Error);
  }
}

TEST_CASE("toy backend extraction contract") {
  const ToyBackend backend(42);
  const ColorClip clip = preprocess(random_clip(24, 48, 36, 7));

  SECTION("output is 2304 finite values, fast then slow") {
    const FeatureVector fv = extract_features(clip, backend);
    REQUIRE(fv.values.size() == static_cast<std::size_t>(kFeatureDim));
    CHECK(fv.fast_part().size() == 400);
    CHECK(fv.slow_part().size() == 1904);
    for (float v : fv.values) CHECK(std::isfinite(v));
  }
  SECTION("deterministic for a fixed backend") {
    const FeatureVector a = extract_features(clip, backend);
    const FeatureVector b = extract_features(clip, backend);
    CHECK(a.values == b.values);
    const ToyBackend same_seed(42);
    CHECK(extract_features(clip, same_seed).values == a.values);
  }
  SECTION("different seeds project differently") {
    const ToyBackend other(43);
    const FeatureVector a = extract_features(clip, backend);
    const FeatureVector b = extract_features(clip, other);
    REQUIRE(a.values.size() == b.values.size());
    CHECK(a.values != b.values);
  }
  SECTION("all-black clip maps to the zero vector") {
    const ColorClip black = preprocess(constant_clip(12, 32, 32, 0, 0, 0));
    const FeatureVector fv = extract_features(black, backend);
    for (float v : fv.values) CHECK(v == 0.0f);
  }
  SECTION("wrong spatial dims are rejected") {
    CHECK_THROWS_AS(extract_features(random_clip(8, 64, 48, 1), backend), Error);
  }
}

TEST_CASE("pathway descriptor") {
  SECTION("static clip has zero temporal-difference energies") {
    const ColorClip clip = preprocess(constant_clip(20, 40, 40, 80, 120, 200));
    const PathwaySample s = sample_pathways(clip);
    const auto desc = pathway_descriptor(clip, s.fast);
    for (int e = 96; e < kDescriptorDim; ++e) CHECK(desc[static_cast<std::size_t>(e)] == 0.0);
  }
  SECTION("mean statistics scale with constant intensity") {
    const ColorClip dim = preprocess(constant_clip(8, 32, 32, 50, 50, 50));
    const ColorClip bright = preprocess(constant_clip(8, 32, 32, 150, 150, 150));
    const auto d1 = pathway_descriptor(dim, sample_pathways(dim).fast);
    const auto d2 = pathway_descriptor(bright, sample_pathways(bright).fast);
    for (int j = 0; j < 48; ++j) {
      CHECK(d2[static_cast<std::size_t>(j)] ==
            Catch::Approx(3.0 * d1[static_cast<std::size_t>(j)]).margin(1e-9));
    }
  }
  SECTION("moving content produces positive energies") {
    ColorClip clip;
    clip.frame_rate = 30.0;
    for (int t = 0; t < 16; ++t) {
      ColorFrame f = ColorFrame::filled(64, 48, 0, 0, 0);
      for (int y = 10; y < 20; ++y) {
        for (int x = 4 * t; x < 4 * t + 8; ++x) f.px(x, y)[0] = 255;
      }
      clip.frames.push_back(std::move(f));
    }
    const ColorClip pre = preprocess(clip);
    const auto desc = pathway_descriptor(pre, sample_pathways(pre).fast);
    double energy = 0.0;
    for (int e = 96; e < kDescriptorDim; ++e) energy += desc[static_cast<std::size_t>(e)];
    CHECK(energy > 0.0);
  }
}

TEST_CASE("feature file round trip") {
  const ToyBackend backend(17);
  FeatureFile file;
  file.backend_name = backend.name();
  file.seed = backend.seed();
  Rng rng(3);
  for (int i = 0; i < 5; ++i) {
    FeatureVector fv;
    fv.values.resize(static_cast<std::size_t>(kFeatureDim));
    for (auto& v : fv.values) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    file.entries.emplace_back("frag" + std::to_string(i), std::move(fv));
  }
  const auto path = std::filesystem::temp_directory_path() / "lamedet_features.csv";
  write_feature_file(path, file);
  const FeatureFile back = read_feature_file(path);
  CHECK(back.backend_name == "toy");
  CHECK(back.seed == 17);
  REQUIRE(back.entries.size() == file.entries.size());
  for (std::size_t i = 0; i < file.entries.size(); ++i) {
    CHECK(back.entries[i].first == file.entries[i].first);
    CHECK(back.entries[i].second.values == file.entries[i].second.values);  // %.9g is exact for float
  }
  std::filesystem::remove(path);
}
