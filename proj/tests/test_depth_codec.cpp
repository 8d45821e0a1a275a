#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "lamedet/depth_codec.hpp"
#include "lamedet/rng.hpp"

using namespace lamedet;
using namespace lamedet::codec;

namespace {

DepthFrame single(uint16_t d) { return DepthFrame::filled(1, 1, d); }

std::array<uint8_t, 3> encode_px(uint16_t d, const DepthRange& r) {
  const ColorFrame f = encode_depth(single(d), r);
  return {f.rgb[0], f.rgb[1], f.rgb[2]};
}

uint16_t roundtrip(uint16_t d, const DepthRange& r) {
  return decode_depth(encode_depth(single(d), r), r).values[0];
}

}  // namespace

TEST_CASE("hue wheel endpoints stay distinct") {
  CHECK(hue_to_rgb(0) == std::array<uint8_t, 3>{255, 0, 0});
  CHECK(hue_to_rgb(1528) == std::array<uint8_t, 3>{255, 0, 1});
  CHECK(hue_to_rgb(764) == std::array<uint8_t, 3>{0, 255, 254});
}

TEST_CASE("hue wheel is invertible on the full grid") {
  std::set<std::array<uint8_t, 3>> seen;
  for (int h = 0; h <= kHueMax; ++h) {
    const auto rgb = hue_to_rgb(h);
    CHECK(rgb_to_hue(rgb[0], rgb[1], rgb[2]) == h);
    seen.insert(rgb);
  }
  CHECK(seen.size() == 1529);  // injectivity: no wraparound collision
}

TEST_CASE("off-wheel colors are rejected") {
  CHECK(rgb_to_hue(10, 20, 30) == -1);
  CHECK(rgb_to_hue(255, 0, 254) == -1);
  CHECK(rgb_to_hue(100, 100, 100) == -1);
}

TEST_CASE("encode maps range bounds and invalid pixels") {
  const DepthRange range;  // 300..3000
  CHECK(encode_px(range.d_min_mm, range) == std::array<uint8_t, 3>{255, 0, 0});
  CHECK(encode_px(0, range) == std::array<uint8_t, 3>{0, 0, 0});
  CHECK(encode_px(250, range) == std::array<uint8_t, 3>{0, 0, 0});   // below range
  CHECK(encode_px(3500, range) == std::array<uint8_t, 3>{0, 0, 0});  // above range
  // exact midpoint of the default range hits h = 764
  CHECK(encode_px(1650, range) == std::array<uint8_t, 3>{0, 255, 254});
}

TEST_CASE("decode maps sentinel and hue origin") {
  const DepthRange range;
  ColorFrame red = ColorFrame::filled(1, 1, 255, 0, 0);
  CHECK(decode_depth(red, range).values[0] == range.d_min_mm);
  ColorFrame black = ColorFrame::filled(1, 1, 0, 0, 0);
  CHECK(decode_depth(black, range).values[0] == 0);
}

TEST_CASE("decode error names the offending pixel") {
  const DepthRange range;
  ColorFrame f = ColorFrame::filled(3, 2, 255, 0, 0);
  f.px(2, 1)[0] = 10;
  f.px(2, 1)[1] = 20;
  f.px(2, 1)[2] = 30;
  try {
    decode_depth(f, range);
    FAIL("expected decode error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("(2,1)") != std::string::npos);
  }
}

TEST_CASE("invalid range is rejected") {
  DepthRange bad;
  bad.d_min_mm = 500;
  bad.d_max_mm = 500;
  CHECK_THROWS_AS(encode_depth(single(600), bad), Error);
  CHECK_THROWS_AS(decode_depth(ColorFrame::filled(1, 1, 0, 0, 0), bad), Error);
}

TEST_CASE("round trip stays within one quantization step") {
  const DepthRange range;
  const double step = quant_step_mm(range);
  Rng rng(42);
  for (int i = 0; i < 2000; ++i) {
    const uint16_t d = static_cast<uint16_t>(rng.range(range.d_min_mm, range.d_max_mm));
    const uint16_t back = roundtrip(d, range);
    CHECK(std::abs(static_cast<int>(back) - static_cast<int>(d)) <= step);
  }
  CHECK(roundtrip(0, range) == 0);  // invalid sentinel survives
  // d at one third of the range
  const uint16_t third = static_cast<uint16_t>(range.d_min_mm + (range.d_max_mm - range.d_min_mm) / 3);
  CHECK(std::abs(static_cast<int>(roundtrip(third, range)) - static_cast<int>(third)) <= step);
}

TEST_CASE("integer-step range round trips exactly") {
  DepthRange unit;
  unit.d_min_mm = 300;
  unit.d_max_mm = 300 + 1528;  // quantization step exactly 1 mm
  for (int d = unit.d_min_mm; d <= unit.d_max_mm; d += 7) {
    CHECK(roundtrip(static_cast<uint16_t>(d), unit) == d);
  }
}

TEST_CASE("encode is deterministic") {
  const DepthRange range;
  DepthFrame f = DepthFrame::filled(8, 8, 0);
  Rng rng(7);
  for (auto& v : f.values) v = static_cast<uint16_t>(rng.range(0, 4000));
  const ColorFrame a = encode_depth(f, range);
  const ColorFrame b = encode_depth(f, range);
  CHECK(a.rgb == b.rgb);
}

TEST_CASE("encode_clip preserves frame count and rate") {
  const DepthRange range;
  SECTION("empty clip") {
    DepthClip clip;
    clip.frame_rate = 30.0;
    const ColorClip out = encode_clip(clip, range);
    CHECK(out.empty());
    CHECK(out.frame_rate == 30.0);
  }
  SECTION("one constant frame") {
    DepthClip clip;
    clip.frames.push_back(DepthFrame::filled(4, 3, 300));
    const ColorClip out = encode_clip(clip, range);
    REQUIRE(out.size() == 1);
    for (std::size_t i = 0; i < out.frames[0].pixel_count(); ++i) {
      CHECK(out.frames[0].rgb[3 * i] == 255);
      CHECK(out.frames[0].rgb[3 * i + 1] == 0);
      CHECK(out.frames[0].rgb[3 * i + 2] == 0);
    }
  }
  SECTION("150 generated frames") {
    DepthClip clip;
    clip.frame_rate = 30.0;
    Rng rng(3);
    for (int t = 0; t < 150; ++t) {
      DepthFrame f = DepthFrame::filled(6, 4, 0);
      for (auto& v : f.values) v = static_cast<uint16_t>(rng.range(300, 3000));
      clip.frames.push_back(std::move(f));
    }
    const ColorClip out = encode_clip(clip, range);
    CHECK(out.size() == 150);
    CHECK(out.frame_rate == 30.0);
  }
}
