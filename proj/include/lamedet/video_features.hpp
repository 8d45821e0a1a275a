#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lamedet/clip.hpp"
#include "lamedet/common.hpp"
#include "lamedet/image.hpp"
#include "lamedet/rng.hpp"

// Clip standardization and the two-pathway feature extractor: every clip is
// resized to 340x256 with its frame rate halved, then sampled at two rates
// (8 slow / 64 fast frames) and mapped to one 2304-dimensional descriptor
// (fast 400 + slow 1904). Backends are pluggable; the seeded toy backend is
// the normative reference at desk scale.

namespace lamedet::vf {

inline constexpr int kTargetWidth = 340;
inline constexpr int kTargetHeight = 256;
inline constexpr int kFastFrames = 64;
inline constexpr int kSlowFrames = 8;
inline constexpr int kFastDim = 400;
inline constexpr int kSlowDim = 1904;
inline constexpr int kFeatureDim = kFastDim + kSlowDim;  // 2304

// grid means+stds per frame (4*4*3*2) plus 8 temporal-difference energies
inline constexpr int kGridCells = 4;
inline constexpr int kDescriptorDim = kGridCells * kGridCells * 3 * 2 + 8;  // 104

inline ColorFrame bilinear_resize(const ColorFrame& src, int out_w, int out_h) {
  ColorFrame out;
  out.width = out_w;
  out.height = out_h;
  out.rgb.resize(static_cast<std::size_t>(out_w) * out_h * 3);
  const double sx = static_cast<double>(src.width) / out_w;
  const double sy = static_cast<double>(src.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      uint8_t* dst = out.rgb.data() + 3 * (static_cast<std::size_t>(y) * out_w + x);
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - wx) * (1 - wy) * src.px(x0, y0)[c] +
                         wx * (1 - wy) * src.px(x1, y0)[c] +
                         (1 - wx) * wy * src.px(x0, y1)[c] + wx * wy * src.px(x1, y1)[c];
        dst[c] = static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
      }
    }
  }
  return out;
}

// Resize every frame to 340x256 and keep every second frame starting from
// index 0; the output rate is half the input rate.
inline ColorClip preprocess(const ColorClip& clip) {
  if (clip.empty()) throw Error(ErrorCategory::data, "preprocess: empty clip");
  require_uniform_dims(clip, "preprocess");
  ColorClip out;
  out.frame_rate = clip.frame_rate / 2.0;
  out.frames.reserve((clip.size() + 1) / 2);
  for (std::size_t i = 0; i < clip.size(); i += 2) {
    out.frames.push_back(bilinear_resize(clip.frames[i], kTargetWidth, kTargetHeight));
  }
  return out;
}

// Frame indices for the two pathways, drawn in temporal order from one clip.
// The slow pathway is every 8th element of the fast one.
struct PathwaySample {
  std::vector<int> fast;  // 64 indices
  std::vector<int> slow;  // 8 indices
};

inline PathwaySample sample_pathways(const ColorClip& clip) {
  if (clip.empty()) throw Error(ErrorCategory::data, "sample_pathways: empty clip");
  const std::size_t n = clip.size();
  PathwaySample s;
  s.fast.resize(kFastFrames);
  for (int i = 0; i < kFastFrames; ++i) {
    s.fast[i] = n == 1 ? 0
                       : static_cast<int>(std::lround(static_cast<double>(i) *
                                                      static_cast<double>(n - 1) /
                                                      (kFastFrames - 1)));
  }
  s.slow.resize(kSlowFrames);
  for (int j = 0; j < kSlowFrames; ++j) s.slow[j] = s.fast[static_cast<std::size_t>(j) * 8];
  return s;
}

// Per-clip descriptor: fast part followed by slow part, length 2304.
struct FeatureVector {
  std::vector<float> values;

  std::span<const float> fast_part() const { return {values.data(), kFastDim}; }
  std::span<const float> slow_part() const { return {values.data() + kFastDim, kSlowDim}; }
};

class FeatureBackend {
 public:
  virtual ~FeatureBackend() = default;
  virtual std::string name() const = 0;
  virtual uint64_t seed() const = 0;
  // maps the pathway frames to (fast 400, slow 1904)
  virtual FeatureVector extract(const ColorClip& clip, const PathwaySample& sample) const = 0;
};

namespace detail {

// 4x4 grid of per-channel means and standard deviations, values in [0,1]:
// layout is 48 means (cell-major, then channel) followed by 48 stds.
inline std::array<double, 96> frame_grid_stats(const ColorFrame& f) {
  std::array<double, 96> out{};
  for (int cy = 0; cy < kGridCells; ++cy) {
    const int y0 = cy * f.height / kGridCells;
    const int y1 = (cy + 1) * f.height / kGridCells;
    for (int cx = 0; cx < kGridCells; ++cx) {
      const int x0 = cx * f.width / kGridCells;
      const int x1 = (cx + 1) * f.width / kGridCells;
      double sum[3] = {0, 0, 0}, sumsq[3] = {0, 0, 0};
      for (int y = y0; y < y1; ++y) {
        const uint8_t* row = f.rgb.data() + 3 * (static_cast<std::size_t>(y) * f.width + x0);
        for (int x = x0; x < x1; ++x) {
          for (int c = 0; c < 3; ++c) {
            const double v = row[3 * (x - x0) + c] / 255.0;
            sum[c] += v;
            sumsq[c] += v * v;
          }
        }
      }
      const double npx = static_cast<double>(y1 - y0) * (x1 - x0);
      for (int c = 0; c < 3; ++c) {
        const int cell = (cy * kGridCells + cx) * 3 + c;
        const double mean = npx > 0 ? sum[c] / npx : 0.0;
        const double var = npx > 0 ? std::max(0.0, sumsq[c] / npx - mean * mean) : 0.0;
        out[static_cast<std::size_t>(cell)] = mean;
        out[48 + static_cast<std::size_t>(cell)] = std::sqrt(var);
      }
    }
  }
  return out;
}

inline double mean_abs_diff(const ColorFrame& a, const ColorFrame& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    acc += std::abs(static_cast<double>(a.rgb[i]) - b.rgb[i]) / 255.0;
  }
  return acc / static_cast<double>(a.rgb.size());
}

}  // namespace detail

// Spatiotemporal descriptor of one pathway: grid stats averaged over the
// pathway's frames, then 8 temporal-difference energies (mean absolute
// inter-frame difference pooled over 8 uniform segments of the frame list;
// an empty segment contributes 0). Duplicate indices are cheap: per-frame
// stats and per-pair diffs are cached.
inline std::array<double, kDescriptorDim> pathway_descriptor(const ColorClip& clip,
                                                             const std::vector<int>& indices) {
  std::array<double, kDescriptorDim> desc{};
  std::map<int, std::array<double, 96>> stat_cache;
  for (int idx : indices) {
    auto it = stat_cache.find(idx);
    if (it == stat_cache.end()) {
      it = stat_cache.emplace(idx, detail::frame_grid_stats(clip.frames[static_cast<std::size_t>(idx)])).first;
    }
    for (int j = 0; j < 96; ++j) desc[static_cast<std::size_t>(j)] += it->second[static_cast<std::size_t>(j)];
  }
  for (int j = 0; j < 96; ++j) desc[static_cast<std::size_t>(j)] /= static_cast<double>(indices.size());

  const std::size_t n_diffs = indices.size() - 1;
  if (n_diffs > 0) {
    std::map<std::pair<int, int>, double> diff_cache;
    std::array<double, 8> seg_sum{};
    std::array<std::size_t, 8> seg_count{};
    for (std::size_t k = 0; k < n_diffs; ++k) {
      const int a = indices[k], b = indices[k + 1];
      double d = 0.0;
      if (a != b) {
        const auto key = std::make_pair(a, b);
        auto it = diff_cache.find(key);
        if (it == diff_cache.end()) {
          it = diff_cache
                   .emplace(key, detail::mean_abs_diff(clip.frames[static_cast<std::size_t>(a)],
                                                       clip.frames[static_cast<std::size_t>(b)]))
                   .first;
        }
        d = it->second;
      }
      const std::size_t seg = k * 8 / n_diffs;
      seg_sum[seg] += d;
      ++seg_count[seg];
    }
    for (int s = 0; s < 8; ++s) {
      desc[96 + static_cast<std::size_t>(s)] =
          seg_count[static_cast<std::size_t>(s)] ? seg_sum[static_cast<std::size_t>(s)] /
                                                       static_cast<double>(seg_count[static_cast<std::size_t>(s)])
                                                 : 0.0;
    }
  }
  return desc;
}

// Reference backend: projects the 104-dim pathway descriptor with a fixed
// seeded Gaussian matrix (no bias) to 400 (fast) and 1904 (slow) dimensions.
// Linear in the descriptor, so a zero descriptor maps to the zero vector.
class ToyBackend final : public FeatureBackend {
 public:
  explicit ToyBackend(uint64_t seed) : seed_(seed) {
    fill_projection(proj_fast_, kFastDim, mix_seed(seed, 1));
    fill_projection(proj_slow_, kSlowDim, mix_seed(seed, 2));
  }

  std::string name() const override { return "toy"; }
  uint64_t seed() const override { return seed_; }

  FeatureVector extract(const ColorClip& clip, const PathwaySample& sample) const override {
    const auto fast_desc = pathway_descriptor(clip, sample.fast);
    const auto slow_desc = pathway_descriptor(clip, sample.slow);
    FeatureVector out;
    out.values.resize(kFeatureDim);
    project(proj_fast_, fast_desc, std::span<float>(out.values.data(), kFastDim));
    project(proj_slow_, slow_desc, std::span<float>(out.values.data() + kFastDim, kSlowDim));
    return out;
  }

 private:
  static void fill_projection(std::vector<float>& m, int rows, uint64_t seed) {
    Rng rng(seed);
    m.resize(static_cast<std::size_t>(rows) * kDescriptorDim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kDescriptorDim));
    for (auto& v : m) v = static_cast<float>(scale * rng.normal());
  }

  static void project(const std::vector<float>& m, const std::array<double, kDescriptorDim>& d,
                      std::span<float> out) {
    for (std::size_t r = 0; r < out.size(); ++r) {
      double acc = 0.0;
      const float* row = m.data() + r * kDescriptorDim;
      for (int j = 0; j < kDescriptorDim; ++j) acc += row[j] * d[static_cast<std::size_t>(j)];
      out[r] = static_cast<float>(acc);
    }
  }

  uint64_t seed_;
  std::vector<float> proj_fast_;  // 400 x 104
  std::vector<float> proj_slow_;  // 1904 x 104
};

// Full extraction: sample both pathways and run the backend; validates the
// preprocessing contract (340x256) and the output shape (2304, all finite).
inline FeatureVector extract_features(const ColorClip& clip, const FeatureBackend& backend) {
  if (clip.empty()) throw Error(ErrorCategory::data, "extract_features: empty clip");
  if (clip.width() != kTargetWidth || clip.height() != kTargetHeight) {
    throw Error(ErrorCategory::data,
                "extract_features: clip not preprocessed to 340x256 (got " +
                    std::to_string(clip.width()) + "x" + std::to_string(clip.height()) + ")");
  }
  const PathwaySample sample = sample_pathways(clip);
  FeatureVector fv = backend.extract(clip, sample);
  if (fv.values.size() != kFeatureDim) {
    throw Error(ErrorCategory::data, "extract_features: backend returned " +
                                         std::to_string(fv.values.size()) + " dims, expected 2304");
  }
  for (float v : fv.values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCategory::data, "extract_features: non-finite feature value");
    }
  }
  return fv;
}

// --- feature files -----------------------------------------------------------
// One record per fragment: fragment_id followed by 2304 comma-separated
// decimal scalars, after a header naming the backend and seed.

struct FeatureFile {
  std::string backend_name;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, FeatureVector>> entries;
};

inline void write_feature_header(std::ostream& out, const std::string& backend_name, uint64_t seed) {
  out << "# backend=" << backend_name << " seed=" << seed << "\n";
}

inline void append_feature_record(std::ostream& out, const std::string& fragment_id,
                                  const FeatureVector& fv) {
  out << fragment_id;
  char buf[40];
  for (float v : fv.values) {
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    out << ',' << buf;
  }
  out << "\n";
}

inline void write_feature_file(const std::filesystem::path& path, const FeatureFile& file) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write feature file " + path.string());
  write_feature_header(out, file.backend_name, file.seed);
  for (const auto& [id, fv] : file.entries) append_feature_record(out, id, fv);
  if (!out) throw Error(ErrorCategory::io, "short write to " + path.string());
}

inline FeatureFile read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open feature file " + path.string());
  FeatureFile file;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# backend=", 0) != 0) {
    throw Error(ErrorCategory::data, "missing feature header in " + path.string());
  }
  {
    const auto seed_pos = line.find(" seed=");
    if (seed_pos == std::string::npos) {
      throw Error(ErrorCategory::data, "missing seed in feature header of " + path.string());
    }
    file.backend_name = line.substr(10, seed_pos - 10);
    file.seed = std::stoull(line.substr(seed_pos + 6));
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto first_comma = line.find(',');
    if (first_comma == std::string::npos) {
      throw Error(ErrorCategory::data,
                  path.string() + ":" + std::to_string(line_no) + ": malformed feature record");
    }
    FeatureVector fv;
    fv.values.reserve(kFeatureDim);
    const char* p = line.c_str() + first_comma;
    while (*p == ',') {
      char* end = nullptr;
      fv.values.push_back(std::strtof(p + 1, &end));
      p = end;
    }
    if (fv.values.size() != kFeatureDim) {
      throw Error(ErrorCategory::data, path.string() + ":" + std::to_string(line_no) + ": expected 2304 values, got " +
                                           std::to_string(fv.values.size()));
    }
    file.entries.emplace_back(line.substr(0, first_comma), std::move(fv));
  }
  return file;
}

}  // namespace lamedet::vf
