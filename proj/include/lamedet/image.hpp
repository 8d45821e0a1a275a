#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "lamedet/common.hpp"

namespace lamedet {

// Metric depth raster, row-major, millimetres. 0 is the sensor's
// "no reading" sentinel and is preserved as such by the codec.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> values;

  static DepthFrame filled(int w, int h, uint16_t v) {
    DepthFrame f;
    f.width = w;
    f.height = h;
    f.values.assign(static_cast<std::size_t>(w) * h, v);
    return f;
  }

  uint16_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  uint16_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// Normalization range for the hue codec; the capture range is configuration,
// not a dataset property.
struct DepthRange {
  uint16_t d_min_mm = 300;
  uint16_t d_max_mm = 3000;

  bool valid() const { return d_min_mm < d_max_mm; }
};

// 8-bit interleaved RGB raster.
struct ColorFrame {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height, r g b per pixel

  static ColorFrame filled(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
    ColorFrame f;
    f.width = w;
    f.height = h;
    f.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < f.rgb.size(); i += 3) {
      f.rgb[i] = r;
      f.rgb[i + 1] = g;
      f.rgb[i + 2] = b;
    }
    return f;
  }

  uint8_t* px(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const uint8_t* px(int x, int y) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// Binary mask raster; values are strictly {0, 1}.
struct MaskFrame {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> values;

  static MaskFrame zeros(int w, int h) {
    MaskFrame f;
    f.width = w;
    f.height = h;
    f.values.assign(static_cast<std::size_t>(w) * h, 0);
    return f;
  }

  uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  std::size_t foreground_count() const {
    std::size_t n = 0;
    for (uint8_t v : values) n += v;
    return n;
  }
};

template <typename FrameT>
inline bool same_dims(const FrameT& a, const FrameT& b) {
  return a.width == b.width && a.height == b.height;
}

inline void require_binary(const MaskFrame& m, const std::string& context) {
  for (uint8_t v : m.values) {
    if (v > 1) throw Error(ErrorCategory::data, context + ": mask is not binary");
  }
}

}  // namespace lamedet
