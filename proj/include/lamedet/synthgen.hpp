#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "lamedet/clip.hpp"
#include "lamedet/common.hpp"
#include "lamedet/corpus.hpp"
#include "lamedet/image.hpp"
#include "lamedet/image_io.hpp"
#include "lamedet/parallel.hpp"
#include "lamedet/rng.hpp"

// Synthetic cow-gait clips with ground truth. The lameness signal follows the
// two scoring cues: spine curvature (lame cows arch the back) and the
// distance between front and rear legs (shorter strides and a narrower
// stance when lame). Each fragment renders a color clip over a cluttered
// static background, a clean metric-depth clip (body near, background far),
// and the exact silhouette mask, all from one geometry pass.

namespace lamedet::synth {

struct GaitParams {
  double spine_curvature = 0.0;  // arc bow of the back, fraction of body height
  double stride_ratio = 1.0;     // rear/front step-length ratio, (0, 1]
  double speed = 1.2;            // pixels/frame at render scale
  double body_scale = 1.0;
  uint64_t seed = 0;
  uint64_t appearance_seed = 0;  // cow-persistent look; 0 derives it from seed

  void validate() const {
    if (spine_curvature < 0.0 || stride_ratio <= 0.0 || stride_ratio > 1.0 || speed < 0.0 ||
        body_scale <= 0.0) {
      throw Error(ErrorCategory::data, "invalid gait params");
    }
  }
};

// Defaults mirror the capture rig: ten-second clips at 30 fps, 640x480.
struct RenderSettings {
  int width = 640;
  int height = 480;
  int frames = 300;
  double fps = 30.0;
  DepthRange depth_range{};

  void validate() const {
    if (width < 32 || height < 32 || frames < 1 || fps <= 0.0 || !depth_range.valid()) {
      throw Error(ErrorCategory::data, "invalid render settings");
    }
  }
};

struct SynthFragment {
  ColorClip rgb;
  DepthClip depth;
  MaskClip mask;
  corpus::FragmentRecord record;
};

// Gait parameter band per locomotion score. Score 1 keeps a near-straight
// spine and symmetric stride; the lame bands start at curvature 0.15 and
// shrink the stride ratio with severity, leaving a gap to the healthy band.
struct GaitBand {
  double curvature_lo, curvature_hi;
  double stride_lo, stride_hi;
};

inline GaitBand gait_band(corpus::LocomotionScore score) {
  if (score.value() == 1) return {0.0, 0.08, 0.9, 1.0};
  const double k_lo = 0.15 + 0.05 * (score.value() - 2);
  const double r_hi = 0.85 - 0.10 * (score.value() - 2);
  return {k_lo, k_lo + 0.06, std::max(0.25, r_hi - 0.12), r_hi};
}

namespace detail {

inline std::array<uint8_t, 3> hsv_to_rgb(double h_deg, double s, double v) {
  const double c = v * s;
  const double hp = h_deg / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  auto to8 = [m](double q) { return static_cast<uint8_t>(std::clamp(std::lround((q + m) * 255.0), 0l, 255l)); };
  return {to8(r), to8(g), to8(b)};
}

struct ClutterRect {
  int x0, y0, x1, y1;
  std::array<uint8_t, 3> color;
  uint16_t depth_mm;
};

struct Appearance {
  std::array<uint8_t, 3> body_color;
  std::array<uint8_t, 3> leg_color;
  uint16_t body_depth_mm;
  double cycles_per_body;  // gait cycles per body length traveled
  double phase0;
  uint64_t texture_seed;
};

inline Appearance make_appearance(uint64_t appearance_seed) {
  Rng rng(appearance_seed);
  Appearance ap;
  const int r = rng.range(125, 175);
  const int g = static_cast<int>(r * rng.uniform(0.62, 0.72));
  const int b = static_cast<int>(g * rng.uniform(0.55, 0.70));
  ap.body_color = {static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b)};
  ap.leg_color = {static_cast<uint8_t>(r * 0.82), static_cast<uint8_t>(g * 0.82),
                  static_cast<uint8_t>(b * 0.82)};
  ap.body_depth_mm = static_cast<uint16_t>(1100 + rng.range(0, 100));
  ap.cycles_per_body = rng.uniform(1.1, 1.5);
  ap.phase0 = rng.uniform(0.0, 6.283185307179586);
  ap.texture_seed = rng.next();
  return ap;
}

// per-pixel tone noise in body-local coordinates so the texture rides along
inline int texture_noise(uint64_t seed, int local_x, int local_y) {
  const uint64_t h = mix_seed(
      seed, (static_cast<uint64_t>(static_cast<uint32_t>(local_x)) << 32) |
                static_cast<uint32_t>(local_y));
  return static_cast<int>(h % 21) - 10;
}

inline std::vector<ClutterRect> make_clutter(Rng& rng, int width, int height) {
  const int n = rng.range(8, 12);
  std::vector<ClutterRect> rects;
  rects.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ClutterRect rect;
    const int w = static_cast<int>(width * rng.uniform(0.08, 0.22));
    const int h = static_cast<int>(height * rng.uniform(0.08, 0.22));
    rect.x0 = rng.range(0, std::max(0, width - w - 1));
    rect.y0 = rng.range(0, std::max(0, height - h - 1));
    rect.x1 = std::min(width, rect.x0 + std::max(2, w));
    rect.y1 = std::min(height, rect.y0 + std::max(2, h));
    // hues away from the cow's brown family
    rect.color = hsv_to_rgb(rng.uniform(100.0, 320.0), rng.uniform(0.35, 0.8), rng.uniform(0.35, 0.85));
    rect.depth_mm = static_cast<uint16_t>(rng.range(1900, 2350));
    rects.push_back(rect);
  }
  return rects;
}

struct Geometry {
  // side view
  double ground_y, leg_len, body_a, body_b, cy;
  double head_r, head_dx, head_dy;
  double hip_y, leg_half_w;
  std::array<double, 4> anchor_dx;  // front near/far, rear near/far
  std::array<double, 4> amp;
  std::array<double, 4> phase;
  std::array<int, 4> stub_side;  // top view: +1 near, -1 far
  // top view
  double top_cy, top_a, top_hw, bend;
  double curvature;
};

inline Geometry make_geometry(const GaitParams& p, int width, int height) {
  Geometry g;
  const double H = height;
  const double s = p.body_scale;
  g.curvature = p.spine_curvature;
  g.ground_y = 0.88 * H;
  g.leg_len = 0.20 * H * s;
  g.body_a = 0.26 * H * s;
  g.body_b = 0.13 * H * s;
  g.cy = g.ground_y - g.leg_len - g.body_b;
  g.head_r = 0.085 * H * s;
  g.head_dx = g.body_a * 0.92 + g.head_r * 0.5;
  g.head_dy = -g.body_b * 0.55 - g.head_r * 0.35;
  g.hip_y = g.cy + g.body_b * 0.5;
  g.leg_half_w = std::max(1.2, 0.016 * H * s);

  const double front_dx = 0.52 * g.body_a;
  const double gap = g.body_a * (0.66 + 0.48 * p.stride_ratio);
  const double rear_dx = front_dx - gap;
  g.anchor_dx = {front_dx, front_dx * 0.92, rear_dx, rear_dx * 1.08};
  const double amp_front = 0.45 * g.leg_len;
  const double amp_rear = amp_front * p.stride_ratio;
  g.amp = {amp_front, amp_front, amp_rear, amp_rear};
  g.phase = {0.0, 3.14159265358979, 1.88495559, 5.02654825};  // rear pair lags by 0.6 pi
  g.stub_side = {1, -1, 1, -1};

  g.top_cy = 0.5 * H;
  g.top_a = g.body_a;
  g.top_hw = 0.15 * H * s;
  g.bend = p.spine_curvature * 2.0 * g.top_hw;
  (void)width;
  return g;
}

inline bool inside_side(const Geometry& g, double cx, double phi, int x, int y) {
  const double u = (x - cx) / g.body_a;
  if (u >= -1.0 && u <= 1.0) {
    const double dy = y - g.cy;
    const double b_eff = dy < 0.0 ? g.body_b * (1.0 + 2.0 * g.curvature * (1.0 - u * u)) : g.body_b;
    if (u * u + (dy / b_eff) * (dy / b_eff) <= 1.0) return true;
  }
  const double hx = cx + g.head_dx, hy = g.cy + g.head_dy;
  if ((x - hx) * (x - hx) + (y - hy) * (y - hy) <= g.head_r * g.head_r) return true;
  if (y >= g.hip_y && y <= g.ground_y) {
    const double frac = (y - g.hip_y) / (g.ground_y - g.hip_y);
    for (int leg = 0; leg < 4; ++leg) {
      const double off = g.amp[static_cast<std::size_t>(leg)] *
                         std::sin(phi + g.phase[static_cast<std::size_t>(leg)]);
      const double lx = cx + g.anchor_dx[static_cast<std::size_t>(leg)] + off * frac;
      if (std::fabs(x - lx) <= g.leg_half_w) return true;
    }
  }
  return false;
}

inline bool inside_top(const Geometry& g, double cx, double phi, int x, int y) {
  const double u = (x - cx) / g.top_a;
  if (u >= -1.0 && u <= 1.0) {
    const double ycl = g.top_cy - g.bend * (1.0 - u * u);
    const double hw = g.top_hw * std::sqrt(std::max(0.0, 1.0 - u * u));
    if (std::fabs(y - ycl) <= hw) return true;
  }
  const double hx = cx + g.top_a * 0.95 + g.head_r * 0.4;
  if ((x - hx) * (x - hx) + (y - g.top_cy) * (y - g.top_cy) <= g.head_r * g.head_r) return true;
  for (int leg = 0; leg < 4; ++leg) {
    const double adx = g.anchor_dx[static_cast<std::size_t>(leg)];
    const double ua = adx / g.top_a;
    const double ycl = g.top_cy - g.bend * (1.0 - ua * ua);
    const double off = g.amp[static_cast<std::size_t>(leg)] *
                       std::sin(phi + g.phase[static_cast<std::size_t>(leg)]);
    const double sx = cx + adx + off;
    const double sy = ycl + g.stub_side[static_cast<std::size_t>(leg)] * g.top_hw * 1.02;
    if (std::fabs(x - sx) <= g.leg_half_w * 1.4 && std::fabs(y - sy) <= g.leg_half_w * 2.2) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

inline SynthFragment generate_fragment(const GaitParams& params, corpus::View view,
                                       corpus::LocomotionScore score,
                                       const RenderSettings& settings = {}) {
  params.validate();
  settings.validate();
  const int W = settings.width, H = settings.height;
  const uint64_t appearance_seed =
      params.appearance_seed != 0 ? params.appearance_seed : mix_seed(params.seed, 0xA99);
  const detail::Appearance ap = detail::make_appearance(appearance_seed);
  const detail::Geometry geom = detail::make_geometry(params, W, H);

  Rng scene_rng(mix_seed(params.seed, 3));
  const auto clutter = detail::make_clutter(scene_rng, W, H);
  Rng flicker_rng(mix_seed(params.seed, 4));

  // keep the whole body in frame for the clip duration
  const double margin_l = geom.body_a + geom.amp[0] + geom.leg_half_w + 4.0;
  const double margin_r = geom.body_a + 2.0 * geom.head_r + 4.0;
  const double x_lo = margin_l;
  const double x_hi = std::max(x_lo, W - margin_r);
  double eff_speed = params.speed;
  if (settings.frames > 1) {
    eff_speed = std::min(eff_speed, (x_hi - x_lo) / (settings.frames - 1));
  }
  const double x0 = eff_speed == 0.0 ? (x_lo + x_hi) / 2.0 : x_lo;

  const uint16_t wall_depth = 2600, floor_depth = 2400, top_floor_depth = 2500;
  const std::array<uint8_t, 3> wall_color = {98, 100, 104};
  const std::array<uint8_t, 3> floor_color = {110, 108, 102};
  const std::array<uint8_t, 3> top_floor_color = {105, 103, 100};
  const int horizon = static_cast<int>(0.55 * H);

  SynthFragment frag;
  frag.rgb.frame_rate = settings.fps;
  frag.depth.frame_rate = settings.fps;
  frag.mask.frame_rate = settings.fps;
  frag.record.view = view;
  frag.record.modality = corpus::Modality::rgb;
  frag.record.score = score;

  // gait phase advances with distance traveled: a standing cow keeps still
  const double cycle_px = 2.0 * geom.body_a / ap.cycles_per_body;
  for (int t = 0; t < settings.frames; ++t) {
    const double cx = x0 + eff_speed * t;
    const double phi = ap.phase0 + 6.283185307179586 * eff_speed * t / cycle_px;
    const double gain = 1.0 + flicker_rng.uniform(-0.07, 0.07);

    MaskFrame mask = MaskFrame::zeros(W, H);
    // loose bounding box around the silhouette
    const int bx0 = std::max(0, static_cast<int>(cx - geom.body_a - geom.amp[0] - 6));
    const int bx1 = std::min(W, static_cast<int>(cx + geom.body_a + 2 * geom.head_r + 6));
    int by0, by1;
    if (view == corpus::View::side) {
      by0 = std::max(0, static_cast<int>(geom.cy - geom.body_b * (1.0 + 2.0 * geom.curvature) -
                                         geom.head_r * 2 - 4));
      by1 = std::min(H, static_cast<int>(geom.ground_y + 2));
    } else {
      by0 = std::max(0, static_cast<int>(geom.top_cy - geom.top_hw - geom.bend - geom.leg_half_w * 3 - 4));
      by1 = std::min(H, static_cast<int>(geom.top_cy + geom.top_hw + geom.leg_half_w * 3 + 4));
    }
    for (int y = by0; y < by1; ++y) {
      for (int x = bx0; x < bx1; ++x) {
        const bool in = view == corpus::View::side ? detail::inside_side(geom, cx, phi, x, y)
                                                   : detail::inside_top(geom, cx, phi, x, y);
        if (in) mask.at(x, y) = 1;
      }
    }

    DepthFrame depth = DepthFrame::filled(W, H, 0);
    ColorFrame rgb = ColorFrame::filled(W, H, 0, 0, 0);
    for (int y = 0; y < H; ++y) {
      const bool is_wall = view == corpus::View::side && y < horizon;
      const std::array<uint8_t, 3>& bg =
          view == corpus::View::top ? top_floor_color : (is_wall ? wall_color : floor_color);
      const uint16_t bg_depth =
          view == corpus::View::top ? top_floor_depth : (is_wall ? wall_depth : floor_depth);
      for (int x = 0; x < W; ++x) {
        uint8_t* px = rgb.px(x, y);
        px[0] = bg[0];
        px[1] = bg[1];
        px[2] = bg[2];
        depth.at(x, y) = bg_depth;
      }
    }
    for (const auto& rect : clutter) {
      for (int y = rect.y0; y < rect.y1; ++y) {
        for (int x = rect.x0; x < rect.x1; ++x) {
          uint8_t* px = rgb.px(x, y);
          px[0] = rect.color[0];
          px[1] = rect.color[1];
          px[2] = rect.color[2];
          depth.at(x, y) = rect.depth_mm;
        }
      }
    }
    const int cx_int = static_cast<int>(std::lround(cx));
    for (int y = by0; y < by1; ++y) {
      for (int x = bx0; x < bx1; ++x) {
        if (!mask.at(x, y)) continue;
        const bool leg_zone = view == corpus::View::side && y > geom.cy + geom.body_b;
        const auto& base = leg_zone ? ap.leg_color : ap.body_color;
        const int noise = detail::texture_noise(ap.texture_seed, x - cx_int, y);
        uint8_t* px = rgb.px(x, y);
        for (int c = 0; c < 3; ++c) {
          px[c] = static_cast<uint8_t>(std::clamp(base[static_cast<std::size_t>(c)] + noise, 0, 255));
        }
        depth.at(x, y) = ap.body_depth_mm;
      }
    }
    for (auto& v : rgb.rgb) {
      v = static_cast<uint8_t>(std::clamp(std::lround(v * gain), 0l, 255l));
    }

    frag.mask.frames.push_back(std::move(mask));
    frag.depth.frames.push_back(std::move(depth));
    frag.rgb.frames.push_back(std::move(rgb));
  }
  return frag;
}

// Spine-bow proxy measured from a silhouette mask: the maximum vertical
// deviation of the top contour above its chord, in pixels.
inline double measure_bow(const MaskFrame& mask) {
  std::vector<int> top(static_cast<std::size_t>(mask.width), -1);
  int x_first = -1, x_last = -1;
  for (int x = 0; x < mask.width; ++x) {
    for (int y = 0; y < mask.height; ++y) {
      if (mask.at(x, y)) {
        top[static_cast<std::size_t>(x)] = y;
        if (x_first < 0) x_first = x;
        x_last = x;
        break;
      }
    }
  }
  if (x_first < 0 || x_last <= x_first) return 0.0;
  const double y0 = top[static_cast<std::size_t>(x_first)];
  const double y1 = top[static_cast<std::size_t>(x_last)];
  double bow = 0.0;
  for (int x = x_first; x <= x_last; ++x) {
    if (top[static_cast<std::size_t>(x)] < 0) continue;
    const double chord = y0 + (y1 - y0) * (x - x_first) / static_cast<double>(x_last - x_first);
    bow = std::max(bow, chord - top[static_cast<std::size_t>(x)]);
  }
  return bow;
}

struct CorpusResult {
  std::vector<corpus::FragmentRecord> records;
  corpus::Distribution distribution;
};

// Writes a full synthetic corpus: per-visit fragments (alternating side/top
// views) under out_dir/fragments/<id>/{rgb,depth,mask} plus the manifest.
// Each cow keeps a persistent appearance and base gait; lame cows draw
// per-visit scores from {2,3} weighted toward 2, mirroring the real-world
// skew toward mild cases. Deterministic per seed; fragments of different
// cows render in parallel.
inline CorpusResult generate_corpus(std::size_t n_cows, std::size_t visits_per_cow,
                                    double lame_fraction, uint64_t seed,
                                    const std::filesystem::path& out_dir,
                                    const RenderSettings& settings = {}) {
  if (n_cows < 2 || visits_per_cow < 1 || lame_fraction < 0.0 || lame_fraction > 1.0) {
    throw Error(ErrorCategory::data, "generate_corpus: infeasible counts");
  }
  settings.validate();
  std::filesystem::create_directories(out_dir / "fragments");

  const std::size_t n_lame = std::min<std::size_t>(
      n_cows, static_cast<std::size_t>(std::lround(lame_fraction * static_cast<double>(n_cows))));
  std::vector<std::size_t> cow_order(n_cows);
  for (std::size_t i = 0; i < n_cows; ++i) cow_order[i] = i;
  Rng assign_rng(mix_seed(seed, 1));
  assign_rng.shuffle(cow_order);
  std::vector<bool> is_lame(n_cows, false);
  for (std::size_t i = 0; i < n_lame; ++i) is_lame[cow_order[i]] = true;

  std::vector<std::vector<corpus::FragmentRecord>> per_cow(n_cows);
  parallel_chunks(n_cows, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t cow = lo; cow < hi; ++cow) {
      Rng cow_rng(mix_seed(seed, 0x100 + cow));
      const uint64_t appearance_seed = cow_rng.next();
      const double base_speed = cow_rng.uniform(0.85, 1.45) * settings.width / 128.0;
      const double base_scale = cow_rng.uniform(0.92, 1.08);
      char cow_id[16];
      std::snprintf(cow_id, sizeof(cow_id), "cow%03zu", cow);

      for (std::size_t visit = 0; visit < visits_per_cow; ++visit) {
        Rng visit_rng(mix_seed(seed, 0x9000 + cow * 256 + visit));
        const int score_value = is_lame[cow] ? (visit_rng.chance(0.9) ? 2 : 3) : 1;
        const corpus::LocomotionScore score(score_value);
        const GaitBand band = gait_band(score);
        GaitParams params;
        params.spine_curvature = visit_rng.uniform(band.curvature_lo, band.curvature_hi);
        params.stride_ratio = visit_rng.uniform(band.stride_lo, band.stride_hi);
        params.speed = base_speed * visit_rng.uniform(0.92, 1.08);
        params.body_scale = base_scale * visit_rng.uniform(0.97, 1.03);
        params.seed = mix_seed(seed, 0x5000 + cow * 256 + visit);
        params.appearance_seed = appearance_seed;
        const corpus::View view = visit % 2 == 0 ? corpus::View::side : corpus::View::top;

        SynthFragment frag = generate_fragment(params, view, score, settings);
        char frag_id[48];
        std::snprintf(frag_id, sizeof(frag_id), "%s_v%02zu_%s", cow_id, visit,
                      corpus::to_string(view));
        frag.record.fragment_id = frag_id;
        frag.record.cow_id = cow_id;
        frag.record.clip_path = std::string("fragments/") + frag_id;

        const auto frag_dir = out_dir / "fragments" / frag_id;
        io::write_color_clip(frag_dir / "rgb", frag.rgb);
        io::write_depth_clip(frag_dir / "depth", frag.depth);
        io::write_mask_clip(frag_dir / "mask", frag.mask);
        per_cow[cow].push_back(frag.record);
      }
    }
  });

  CorpusResult result;
  for (const auto& records : per_cow) {
    result.records.insert(result.records.end(), records.begin(), records.end());
  }
  result.distribution = corpus::distribution(result.records);
  corpus::save_manifest_file(out_dir / "manifest.csv", result.records);
  return result;
}

}  // namespace lamedet::synth
