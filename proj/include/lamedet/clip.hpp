#pragma once

#include <cstddef>
#include <vector>

#include "lamedet/common.hpp"
#include "lamedet/image.hpp"

namespace lamedet {

// Ordered frame sequence with rate metadata; the unit flowing through the
// pipeline. All frames of a clip share dimensions.
template <typename FrameT>
struct Clip {
  std::vector<FrameT> frames;
  double frame_rate = 30.0;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }

  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
};

using ColorClip = Clip<ColorFrame>;
using DepthClip = Clip<DepthFrame>;
using MaskClip = Clip<MaskFrame>;

template <typename FrameT>
inline void require_uniform_dims(const Clip<FrameT>& clip, const char* context) {
  for (const auto& f : clip.frames) {
    if (!same_dims(f, clip.frames.front())) {
      throw Error(ErrorCategory::data, std::string(context) + ": frames differ in dimensions");
    }
  }
}

}  // namespace lamedet
