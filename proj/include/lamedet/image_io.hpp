#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lamedet/clip.hpp"
#include "lamedet/common.hpp"
#include "lamedet/image.hpp"

// Raster and clip storage. Depth frames are 16-bit PGM (P5), color frames are
// PPM (P6), masks are 8-bit PGM with foreground stored as 255. Clips live in
// a directory of numerically ordered frames plus a clip.meta sidecar.

namespace lamedet::io {

namespace fs = std::filesystem;

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  int c = in.peek();
  while (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
}

inline long read_pnm_int(std::istream& in, const std::string& path) {
  skip_pnm_space(in);
  long v = -1;
  if (!(in >> v) || v < 0) {
    throw Error(ErrorCategory::io, "malformed PNM header in " + path);
  }
  return v;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  return out;
}

}  // namespace detail

inline void write_ppm(const fs::path& path, const ColorFrame& frame) {
  auto out = detail::open_out(path);
  out << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.rgb.data()),
            static_cast<std::streamsize>(frame.rgb.size()));
  if (!out) throw Error(ErrorCategory::io, "short write to " + path.string());
}

inline ColorFrame read_ppm(const fs::path& path) {
  auto in = detail::open_in(path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw Error(ErrorCategory::io, "not a P6 PPM: " + path.string());
  ColorFrame f;
  f.width = static_cast<int>(detail::read_pnm_int(in, path.string()));
  f.height = static_cast<int>(detail::read_pnm_int(in, path.string()));
  const long maxval = detail::read_pnm_int(in, path.string());
  if (maxval != 255) throw Error(ErrorCategory::io, "unsupported PPM maxval in " + path.string());
  in.get();  // single whitespace after maxval
  f.rgb.resize(f.pixel_count() * 3);
  in.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(f.rgb.size())) {
    throw Error(ErrorCategory::io, "truncated PPM: " + path.string());
  }
  return f;
}

// 16-bit single-channel PGM, big-endian samples per the Netpbm spec.
inline void write_pgm16(const fs::path& path, const DepthFrame& frame) {
  auto out = detail::open_out(path);
  out << "P5\n" << frame.width << " " << frame.height << "\n65535\n";
  std::vector<uint8_t> buf(frame.values.size() * 2);
  for (std::size_t i = 0; i < frame.values.size(); ++i) {
    buf[2 * i] = static_cast<uint8_t>(frame.values[i] >> 8);
    buf[2 * i + 1] = static_cast<uint8_t>(frame.values[i] & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCategory::io, "short write to " + path.string());
}

inline DepthFrame read_pgm16(const fs::path& path) {
  auto in = detail::open_in(path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw Error(ErrorCategory::io, "not a P5 PGM: " + path.string());
  DepthFrame f;
  f.width = static_cast<int>(detail::read_pnm_int(in, path.string()));
  f.height = static_cast<int>(detail::read_pnm_int(in, path.string()));
  const long maxval = detail::read_pnm_int(in, path.string());
  if (maxval != 65535) {
    throw Error(ErrorCategory::io, "expected 16-bit PGM in " + path.string());
  }
  in.get();
  std::vector<uint8_t> buf(f.pixel_count() * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw Error(ErrorCategory::io, "truncated PGM: " + path.string());
  }
  f.values.resize(f.pixel_count());
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    f.values[i] = static_cast<uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return f;
}

// Masks on disk use 0/255; in memory they are strict {0,1}.
inline void write_mask_pgm(const fs::path& path, const MaskFrame& mask) {
  auto out = detail::open_out(path);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<uint8_t> buf(mask.values.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask.values[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCategory::io, "short write to " + path.string());
}

inline MaskFrame read_mask_pgm(const fs::path& path) {
  auto in = detail::open_in(path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw Error(ErrorCategory::io, "not a P5 PGM: " + path.string());
  MaskFrame m;
  m.width = static_cast<int>(detail::read_pnm_int(in, path.string()));
  m.height = static_cast<int>(detail::read_pnm_int(in, path.string()));
  const long maxval = detail::read_pnm_int(in, path.string());
  if (maxval != 255) throw Error(ErrorCategory::io, "expected 8-bit PGM in " + path.string());
  in.get();
  std::vector<uint8_t> buf(m.pixel_count());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw Error(ErrorCategory::io, "truncated PGM: " + path.string());
  }
  m.values.resize(m.pixel_count());
  for (std::size_t i = 0; i < buf.size(); ++i) m.values[i] = buf[i] >= 128 ? 1 : 0;
  return m;
}

struct ClipMeta {
  std::size_t frame_count = 0;
  double frame_rate = 0.0;
};

inline void write_clip_meta(const fs::path& dir, const ClipMeta& meta) {
  auto out = detail::open_out(dir / "clip.meta");
  char rate[64];
  std::snprintf(rate, sizeof(rate), "%.17g", meta.frame_rate);
  out << "frames=" << meta.frame_count << "\n"
      << "fps=" << rate << "\n";
}

inline ClipMeta read_clip_meta(const fs::path& dir) {
  auto in = detail::open_in(dir / "clip.meta");
  ClipMeta meta;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "frames") meta.frame_count = std::stoull(val);
    if (key == "fps") meta.frame_rate = std::stod(val);
  }
  if (meta.frame_rate <= 0.0) {
    throw Error(ErrorCategory::io, "bad clip.meta in " + dir.string());
  }
  return meta;
}

inline std::string frame_name(std::size_t index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.%s", index, ext);
  return buf;
}

template <typename FrameT, typename WriteFn>
void write_clip_dir(const fs::path& dir, const Clip<FrameT>& clip, const char* ext, WriteFn&& write_frame) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    write_frame(dir / frame_name(i, ext), clip.frames[i]);
  }
  write_clip_meta(dir, ClipMeta{clip.frames.size(), clip.frame_rate});
}

template <typename FrameT, typename ReadFn>
Clip<FrameT> read_clip_dir(const fs::path& dir, const char* ext, ReadFn&& read_frame) {
  if (!fs::exists(dir / "clip.meta")) {
    throw Error(ErrorCategory::io, "missing clip directory or clip.meta: " + dir.string());
  }
  const ClipMeta meta = read_clip_meta(dir);
  Clip<FrameT> clip;
  clip.frame_rate = meta.frame_rate;
  clip.frames.reserve(meta.frame_count);
  for (std::size_t i = 0; i < meta.frame_count; ++i) {
    clip.frames.push_back(read_frame(dir / frame_name(i, ext)));
  }
  return clip;
}

inline void write_color_clip(const fs::path& dir, const ColorClip& clip) {
  write_clip_dir(dir, clip, "ppm", [](const fs::path& p, const ColorFrame& f) { write_ppm(p, f); });
}

inline ColorClip read_color_clip(const fs::path& dir) {
  return read_clip_dir<ColorFrame>(dir, "ppm", [](const fs::path& p) { return read_ppm(p); });
}

inline void write_depth_clip(const fs::path& dir, const DepthClip& clip) {
  write_clip_dir(dir, clip, "pgm", [](const fs::path& p, const DepthFrame& f) { write_pgm16(p, f); });
}

inline DepthClip read_depth_clip(const fs::path& dir) {
  return read_clip_dir<DepthFrame>(dir, "pgm", [](const fs::path& p) { return read_pgm16(p); });
}

inline void write_mask_clip(const fs::path& dir, const MaskClip& clip) {
  write_clip_dir(dir, clip, "pgm", [](const fs::path& p, const MaskFrame& f) { write_mask_pgm(p, f); });
}

inline MaskClip read_mask_clip(const fs::path& dir) {
  return read_clip_dir<MaskFrame>(dir, "pgm", [](const fs::path& p) { return read_mask_pgm(p); });
}

}  // namespace lamedet::io
