#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "lamedet/clip.hpp"
#include "lamedet/common.hpp"
#include "lamedet/image.hpp"

// Depth-to-color codec. Metric depth is quantized onto a 1529-level hue wheel
// so that depth video survives 3-channel storage and decodes back within one
// quantization step. The wheel is capped just short of a full revolution:
// h = 0 maps to (255,0,0) while h = 1528 maps to (255,0,1), so the endpoints
// never collide and decoding is unambiguous. Pixels with no sensor reading
// (depth 0) or outside the working range encode as pure black.

namespace lamedet::codec {

inline constexpr int kHueMax = 1528;

inline double quant_step_mm(const DepthRange& range) {
  return static_cast<double>(range.d_max_mm - range.d_min_mm) / kHueMax;
}

inline void check_range(const DepthRange& range) {
  if (!range.valid()) {
    throw Error(ErrorCategory::data, "depth range invalid: d_min must be < d_max");
  }
}

inline std::array<uint8_t, 3> hue_to_rgb(int h) {
  int r, g, b;
  if (h <= 255) r = 255;
  else if (h < 510) r = 510 - h;
  else if (h <= 1020) r = 0;
  else if (h < 1275) r = h - 1020;
  else r = 255;

  if (h <= 255) g = h;
  else if (h < 765) g = 255;
  else if (h <= 1020) g = 1020 - h;
  else g = 0;

  if (h <= 510) b = 0;
  else if (h < 765) b = h - 510;
  else if (h <= 1275) b = 255;
  else b = 1529 - h;

  return {static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b)};
}

// Inverse of hue_to_rgb; returns -1 when (r,g,b) does not lie on the wheel.
// The candidate segment is identified by which channel is saturated or zero,
// then validated by re-encoding, which also rejects near-wheel impostors
// such as (255,0,254).
inline int rgb_to_hue(uint8_t r, uint8_t g, uint8_t b) {
  int h = -1;
  if (r == 255 && b == 0) h = g;
  else if (g == 255 && b == 0) h = 510 - r;
  else if (r == 0 && g == 255) h = 510 + b;
  else if (r == 0 && b == 255) h = 1020 - g;
  else if (b == 255 && g == 0) h = 1020 + r;
  else if (r == 255 && g == 0) h = 1529 - b;
  if (h < 0 || h > kHueMax) return -1;
  const auto back = hue_to_rgb(h);
  if (back[0] != r || back[1] != g || back[2] != b) return -1;
  return h;
}

inline ColorFrame encode_depth(const DepthFrame& frame, const DepthRange& range) {
  check_range(range);
  if (frame.width <= 0 || frame.height <= 0) {
    throw Error(ErrorCategory::data, "encode_depth: empty frame");
  }
  ColorFrame out;
  out.width = frame.width;
  out.height = frame.height;
  out.rgb.resize(frame.pixel_count() * 3);
  const double scale = static_cast<double>(kHueMax) / (range.d_max_mm - range.d_min_mm);
  for (std::size_t i = 0; i < frame.values.size(); ++i) {
    const uint16_t d = frame.values[i];
    uint8_t* px = out.rgb.data() + 3 * i;
    if (d == 0 || d < range.d_min_mm || d > range.d_max_mm) {
      px[0] = px[1] = px[2] = 0;
      continue;
    }
    const int h = static_cast<int>(std::lround((d - range.d_min_mm) * scale));
    const auto rgb = hue_to_rgb(h);
    px[0] = rgb[0];
    px[1] = rgb[1];
    px[2] = rgb[2];
  }
  return out;
}

inline DepthFrame decode_depth(const ColorFrame& frame, const DepthRange& range) {
  check_range(range);
  DepthFrame out;
  out.width = frame.width;
  out.height = frame.height;
  out.values.resize(frame.pixel_count());
  const double step = quant_step_mm(range);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const uint8_t* px = frame.rgb.data() + 3 * i;
    if (px[0] == 0 && px[1] == 0 && px[2] == 0) {
      out.values[i] = 0;
      continue;
    }
    const int h = rgb_to_hue(px[0], px[1], px[2]);
    if (h < 0) {
      const long x = static_cast<long>(i) % frame.width;
      const long y = static_cast<long>(i) / frame.width;
      throw Error(ErrorCategory::data,
                  "decode_depth: color (" + std::to_string(px[0]) + "," + std::to_string(px[1]) +
                      "," + std::to_string(px[2]) + ") off the hue wheel at pixel (" +
                      std::to_string(x) + "," + std::to_string(y) + ")");
    }
    out.values[i] = static_cast<uint16_t>(std::lround(range.d_min_mm + h * step));
  }
  return out;
}

inline ColorClip encode_clip(const DepthClip& clip, const DepthRange& range) {
  check_range(range);
  ColorClip out;
  out.frame_rate = clip.frame_rate;
  out.frames.reserve(clip.frames.size());
  for (const auto& f : clip.frames) out.frames.push_back(encode_depth(f, range));
  return out;
}

inline DepthClip decode_clip(const ColorClip& clip, const DepthRange& range) {
  check_range(range);
  DepthClip out;
  out.frame_rate = clip.frame_rate;
  out.frames.reserve(clip.frames.size());
  for (const auto& f : clip.frames) out.frames.push_back(decode_depth(f, range));
  return out;
}

}  // namespace lamedet::codec
