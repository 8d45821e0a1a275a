#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lamedet/classifier.hpp"
#include "lamedet/common.hpp"
#include "lamedet/corpus.hpp"
#include "lamedet/depth_codec.hpp"
#include "lamedet/evaluation.hpp"
#include "lamedet/image_io.hpp"
#include "lamedet/parallel.hpp"
#include "lamedet/segmentation.hpp"
#include "lamedet/synthgen.hpp"
#include "lamedet/video_features.hpp"

// Pipeline orchestration: one flat sectioned key-value config drives all
// subcommands. Every command is idempotent for a fixed config and records a
// run manifest (config hash + seeds) next to its outputs; re-running
// overwrites byte-identical files.

namespace lamedet::pipeline {

namespace fs = std::filesystem;

struct Config {
  // [paths]
  fs::path work_dir;
  fs::path manifest;
  fs::path clip_root;
  // [depth]
  DepthRange depth_range;
  // [synth]
  std::size_t synth_cows = 40;
  std::size_t synth_visits = 8;
  double synth_lame_fraction = 0.5;
  uint64_t synth_seed = 7;
  synth::RenderSettings render;
  // [split]
  std::size_t split_healthy_cows = 10;
  std::size_t split_lame_cows = 10;
  uint64_t split_seed = 11;
  // [segmentation]
  seg::SegTrainConfig seg_train;
  int seg_train_frames_per_view = 250;
  fs::path seg_images_dir;  // optional external paired directories
  fs::path seg_masks_dir;
  // [features]
  std::string backend_name = "toy";
  uint64_t backend_seed = 17;
  // [classifier]
  cls::ClsTrainConfig cls_train;
  int cls_hidden1 = 512;
  int cls_hidden2 = 64;
  // [grid]
  std::vector<corpus::View> views;
  std::vector<eval::InputType> inputs;
  // [run]
  unsigned threads = 0;

  std::string config_hash;
  std::map<std::string, std::string> canonical;  // effective settings

  void apply_runtime() const { set_thread_limit(threads); }

  bool grid_has(eval::InputType t) const {
    return std::find(inputs.begin(), inputs.end(), t) != inputs.end();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::map<std::string, std::string> default_settings() {
  return {
      {"paths.work_dir", "run"},
      {"paths.manifest", ""},
      {"paths.clip_root", ""},
      {"depth.d_min_mm", "300"},
      {"depth.d_max_mm", "3000"},
      {"synth.cows", "40"},
      {"synth.visits_per_cow", "8"},
      {"synth.lame_fraction", "0.5"},
      {"synth.seed", "7"},
      {"synth.width", "640"},
      {"synth.height", "480"},
      {"synth.frames", "300"},
      {"synth.fps", "30"},
      {"split.healthy_cows", "10"},
      {"split.lame_cows", "10"},
      {"split.seed", "11"},
      {"segmentation.epochs", "40"},
      {"segmentation.batch_size", "8"},
      {"segmentation.learning_rate", "0.0001"},
      {"segmentation.validation_fraction", "0.2"},
      {"segmentation.threshold", "0.5"},
      {"segmentation.seed", "13"},
      {"segmentation.train_frames_per_view", "250"},
      {"segmentation.augment_flip", "true"},
      {"segmentation.augment_brightness", "true"},
      {"segmentation.augment_rotation", "true"},
      {"segmentation.images_dir", ""},
      {"segmentation.masks_dir", ""},
      {"features.backend", "toy"},
      {"features.seed", "17"},
      {"classifier.epochs", "100"},
      {"classifier.batch_size", "20"},
      {"classifier.learning_rate", "0.001"},
      {"classifier.seed", "19"},
      {"classifier.hidden1", "512"},
      {"classifier.hidden2", "64"},
      {"grid.views", "side,top"},
      {"grid.inputs", "rgb,mask,depth,segmoverdepth"},
      {"run.threads", "0"},
  };
}

inline uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline long to_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCategory::config, "bad integer for " + key + ": '" + value + "'");
  }
}

inline double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCategory::config, "bad number for " + key + ": '" + value + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCategory::config, "bad boolean for " + key + ": '" + value + "'");
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

}  // namespace detail

// Flat INI-style config: [section] headers, key = value lines, '#' comments.
// Unknown keys are rejected. Relative paths resolve against the config file's
// directory; the hash covers the effective (default-filled) settings.
inline Config load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open config " + path.string());

  auto settings = detail::default_settings();
  std::set<std::string> known;
  for (const auto& [k, v] : settings) known.insert(k);

  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.resize(hash_pos);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCategory::config,
                  path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = section + "." + detail::trim(line.substr(0, eq));
    if (!known.count(key)) {
      throw Error(ErrorCategory::config,
                  path.string() + ":" + std::to_string(line_no) + ": unknown setting '" + key + "'");
    }
    settings[key] = detail::trim(line.substr(eq + 1));
  }

  Config cfg;
  cfg.canonical = settings;
  {
    std::ostringstream canon;
    for (const auto& [k, v] : settings) canon << k << "=" << v << "\n";
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(canon.str())));
    cfg.config_hash = buf;
  }

  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto resolve = [&base](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    const fs::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  cfg.work_dir = resolve(settings["paths.work_dir"]);
  cfg.clip_root = settings["paths.clip_root"].empty() ? cfg.work_dir / "corpus"
                                                      : resolve(settings["paths.clip_root"]);
  cfg.manifest = settings["paths.manifest"].empty() ? cfg.clip_root / "manifest.csv"
                                                    : resolve(settings["paths.manifest"]);

  cfg.depth_range.d_min_mm = static_cast<uint16_t>(detail::to_long("depth.d_min_mm", settings["depth.d_min_mm"]));
  cfg.depth_range.d_max_mm = static_cast<uint16_t>(detail::to_long("depth.d_max_mm", settings["depth.d_max_mm"]));
  if (!cfg.depth_range.valid()) throw Error(ErrorCategory::config, "depth range invalid");

  cfg.synth_cows = static_cast<std::size_t>(detail::to_long("synth.cows", settings["synth.cows"]));
  cfg.synth_visits = static_cast<std::size_t>(detail::to_long("synth.visits_per_cow", settings["synth.visits_per_cow"]));
  cfg.synth_lame_fraction = detail::to_double("synth.lame_fraction", settings["synth.lame_fraction"]);
  cfg.synth_seed = static_cast<uint64_t>(detail::to_long("synth.seed", settings["synth.seed"]));
  cfg.render.width = static_cast<int>(detail::to_long("synth.width", settings["synth.width"]));
  cfg.render.height = static_cast<int>(detail::to_long("synth.height", settings["synth.height"]));
  cfg.render.frames = static_cast<int>(detail::to_long("synth.frames", settings["synth.frames"]));
  cfg.render.fps = detail::to_double("synth.fps", settings["synth.fps"]);
  cfg.render.depth_range = cfg.depth_range;

  cfg.split_healthy_cows = static_cast<std::size_t>(detail::to_long("split.healthy_cows", settings["split.healthy_cows"]));
  cfg.split_lame_cows = static_cast<std::size_t>(detail::to_long("split.lame_cows", settings["split.lame_cows"]));
  cfg.split_seed = static_cast<uint64_t>(detail::to_long("split.seed", settings["split.seed"]));

  cfg.seg_train.epochs = static_cast<int>(detail::to_long("segmentation.epochs", settings["segmentation.epochs"]));
  cfg.seg_train.batch_size = static_cast<int>(detail::to_long("segmentation.batch_size", settings["segmentation.batch_size"]));
  cfg.seg_train.learning_rate = detail::to_double("segmentation.learning_rate", settings["segmentation.learning_rate"]);
  cfg.seg_train.validation_fraction =
      detail::to_double("segmentation.validation_fraction", settings["segmentation.validation_fraction"]);
  cfg.seg_train.threshold = detail::to_double("segmentation.threshold", settings["segmentation.threshold"]);
  cfg.seg_train.seed = static_cast<uint64_t>(detail::to_long("segmentation.seed", settings["segmentation.seed"]));
  cfg.seg_train.augment_flip = detail::to_bool("segmentation.augment_flip", settings["segmentation.augment_flip"]);
  cfg.seg_train.augment_brightness =
      detail::to_bool("segmentation.augment_brightness", settings["segmentation.augment_brightness"]);
  cfg.seg_train.augment_rotation =
      detail::to_bool("segmentation.augment_rotation", settings["segmentation.augment_rotation"]);
  cfg.seg_train_frames_per_view =
      static_cast<int>(detail::to_long("segmentation.train_frames_per_view", settings["segmentation.train_frames_per_view"]));
  cfg.seg_images_dir = resolve(settings["segmentation.images_dir"]);
  cfg.seg_masks_dir = resolve(settings["segmentation.masks_dir"]);

  cfg.backend_name = settings["features.backend"];
  cfg.backend_seed = static_cast<uint64_t>(detail::to_long("features.seed", settings["features.seed"]));

  cfg.cls_train.epochs = static_cast<int>(detail::to_long("classifier.epochs", settings["classifier.epochs"]));
  cfg.cls_train.batch_size = static_cast<int>(detail::to_long("classifier.batch_size", settings["classifier.batch_size"]));
  cfg.cls_train.learning_rate = detail::to_double("classifier.learning_rate", settings["classifier.learning_rate"]);
  cfg.cls_train.seed = static_cast<uint64_t>(detail::to_long("classifier.seed", settings["classifier.seed"]));
  cfg.cls_hidden1 = static_cast<int>(detail::to_long("classifier.hidden1", settings["classifier.hidden1"]));
  cfg.cls_hidden2 = static_cast<int>(detail::to_long("classifier.hidden2", settings["classifier.hidden2"]));

  for (const auto& token : detail::split_list(settings["grid.views"])) {
    const auto view = corpus::try_parse_view(token);
    if (!view) throw Error(ErrorCategory::config, "unknown view in grid.views: '" + token + "'");
    cfg.views.push_back(*view);
  }
  for (const auto& token : detail::split_list(settings["grid.inputs"])) {
    const auto input = eval::try_parse_input(token);
    if (!input) throw Error(ErrorCategory::config, "unknown input in grid.inputs: '" + token + "'");
    cfg.inputs.push_back(*input);
  }
  if (cfg.views.empty() || cfg.inputs.empty()) {
    throw Error(ErrorCategory::config, "grid.views and grid.inputs must be non-empty");
  }

  cfg.threads = static_cast<unsigned>(detail::to_long("run.threads", settings["run.threads"]));
  return cfg;
}

namespace detail {

inline void write_run_manifest(const fs::path& dir, const Config& cfg, const std::string& command) {
  fs::create_directories(dir);
  std::ofstream out(dir / "run.manifest", std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write run manifest in " + dir.string());
  out << "command=" << command << "\n"
      << "config_hash=" << cfg.config_hash << "\n"
      << "synth.seed=" << cfg.synth_seed << "\n"
      << "split.seed=" << cfg.split_seed << "\n"
      << "segmentation.seed=" << cfg.seg_train.seed << "\n"
      << "features.seed=" << cfg.backend_seed << "\n"
      << "classifier.seed=" << cfg.cls_train.seed << "\n";
}

inline void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw Error(ErrorCategory::prerequisite,
                "missing " + path.string() + "; run `lamedet " + producer + "` first");
  }
}

inline fs::path clip_dir(const Config& cfg, const corpus::FragmentRecord& rec) {
  const fs::path p(rec.clip_path);
  return p.is_absolute() ? p : cfg.clip_root / p;
}

inline std::vector<corpus::FragmentRecord> grid_records(const Config& cfg,
                                                        const std::vector<corpus::FragmentRecord>& all) {
  std::vector<corpus::FragmentRecord> out;
  for (const auto& r : all) {
    if (std::find(cfg.views.begin(), cfg.views.end(), r.view) != cfg.views.end()) out.push_back(r);
  }
  return out;
}

inline std::unique_ptr<vf::FeatureBackend> make_backend(const Config& cfg) {
  if (cfg.backend_name == "toy") return std::make_unique<vf::ToyBackend>(cfg.backend_seed);
  throw Error(ErrorCategory::config,
              "unknown feature backend '" + cfg.backend_name + "' (built-in: toy)");
}

}  // namespace detail

inline synth::CorpusResult cmd_synth(const Config& cfg) {
  cfg.apply_runtime();
  auto result = synth::generate_corpus(cfg.synth_cows, cfg.synth_visits, cfg.synth_lame_fraction,
                                       cfg.synth_seed, cfg.clip_root, cfg.render);
  if (cfg.manifest != cfg.clip_root / "manifest.csv") {
    corpus::save_manifest_file(cfg.manifest, result.records);
  }
  detail::write_run_manifest(cfg.clip_root, cfg, "synth");
  return result;
}

// Hue-encode every fragment's metric-depth clip.
inline void cmd_encode_depth(const Config& cfg) {
  cfg.apply_runtime();
  detail::require_artifact(cfg.manifest, "synth");
  const auto records = detail::grid_records(cfg, corpus::load_manifest_file(cfg.manifest));
  const fs::path out_root = cfg.work_dir / "depth_hue";
  fs::create_directories(out_root);
  parallel_chunks(records.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto depth_dir = detail::clip_dir(cfg, records[i]) / "depth";
      detail::require_artifact(depth_dir, "synth");
      const DepthClip depth = io::read_depth_clip(depth_dir);
      io::write_color_clip(out_root / records[i].fragment_id,
                           codec::encode_clip(depth, cfg.depth_range));
    }
  });
  detail::write_run_manifest(out_root, cfg, "encode-depth");
}

inline corpus::SplitResult cmd_split(const Config& cfg) {
  cfg.apply_runtime();
  detail::require_artifact(cfg.manifest, "synth");
  const auto records = corpus::load_manifest_file(cfg.manifest);
  auto split = corpus::split_by_cow(records, cfg.split_healthy_cows, cfg.split_lame_cows,
                                    cfg.split_seed);
  const fs::path dir = cfg.work_dir / "splits";
  corpus::save_manifest_file(dir / "train.csv", split.train);
  corpus::save_manifest_file(dir / "val.csv", split.validation);
  {
    std::ofstream cows(dir / "validation_cows.txt", std::ios::trunc);
    for (const auto& c : split.validation_cows) cows << c << "\n";
  }
  detail::write_run_manifest(dir, cfg, "split");
  return split;
}

namespace detail {

// Evenly spaced annotated frames drawn from the train split of one view.
inline void collect_seg_training_set(const Config& cfg, corpus::View view,
                                     std::vector<ColorFrame>& images,
                                     std::vector<MaskFrame>& masks) {
  if (!cfg.seg_images_dir.empty() || !cfg.seg_masks_dir.empty()) {
    if (cfg.seg_images_dir.empty() || cfg.seg_masks_dir.empty()) {
      throw Error(ErrorCategory::config,
                  "segmentation.images_dir and masks_dir must be set together");
    }
    std::vector<fs::path> image_files;
    for (const auto& e : fs::directory_iterator(cfg.seg_images_dir)) {
      if (e.is_regular_file()) image_files.push_back(e.path());
    }
    std::sort(image_files.begin(), image_files.end());
    for (const auto& img_path : image_files) {
      const fs::path mask_path = cfg.seg_masks_dir / (img_path.stem().string() + ".pgm");
      require_artifact(mask_path, "annotation export (paired image/mask directories)");
      images.push_back(io::read_ppm(img_path));
      masks.push_back(io::read_mask_pgm(mask_path));
    }
    return;
  }

  require_artifact(cfg.work_dir / "splits" / "train.csv", "split");
  const auto train = corpus::load_manifest_file(cfg.work_dir / "splits" / "train.csv");
  std::vector<corpus::FragmentRecord> records;
  for (const auto& r : train) {
    if (r.view == view) records.push_back(r);
  }
  if (records.empty()) {
    throw Error(ErrorCategory::data,
                std::string("no train fragments for view ") + corpus::to_string(view));
  }
  const std::size_t want = static_cast<std::size_t>(cfg.seg_train_frames_per_view);
  const std::size_t per_frag = (want + records.size() - 1) / records.size();
  for (const auto& r : records) {
    if (images.size() >= want) break;
    const fs::path frag_dir = clip_dir(cfg, r);
    const fs::path mask_dir = frag_dir / "mask";
    if (!fs::exists(mask_dir)) {
      throw Error(ErrorCategory::prerequisite,
                  "no ground-truth masks at " + mask_dir.string() +
                      "; set segmentation.images_dir/masks_dir for externally annotated frames");
    }
    const ColorClip rgb = io::read_color_clip(frag_dir / "rgb");
    const MaskClip gt = io::read_mask_clip(mask_dir);
    const std::size_t take = std::min(per_frag, want - images.size());
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t idx = take == 1 ? rgb.size() / 2 : k * (rgb.size() - 1) / (take - 1);
      images.push_back(rgb.frames[idx]);
      masks.push_back(gt.frames[idx]);
    }
  }
}

inline fs::path seg_model_path(const Config& cfg, corpus::View view) {
  return cfg.work_dir / "models" / (std::string("seg_") + corpus::to_string(view) + ".bin");
}

inline fs::path cls_model_path(const Config& cfg, corpus::View view, eval::InputType input) {
  return cfg.work_dir / "models" /
         (std::string("cls_") + corpus::to_string(view) + "_" + eval::to_token(input) + ".bin");
}

}  // namespace detail

// Train one segmenter per grid view on annotated frames from the train split
// (or the configured external image/mask directories).
inline void cmd_train_seg(const Config& cfg) {
  cfg.apply_runtime();
  const bool needs_masks = cfg.grid_has(eval::InputType::mask) || cfg.grid_has(eval::InputType::segm_over_depth);
  if (!needs_masks) return;
  for (corpus::View view : cfg.views) {
    std::vector<ColorFrame> images;
    std::vector<MaskFrame> masks;
    detail::collect_seg_training_set(cfg, view, images, masks);
    seg::SegTrainConfig train_cfg = cfg.seg_train;
    train_cfg.seed = mix_seed(cfg.seg_train.seed, static_cast<uint64_t>(view));
    auto [model, history] = seg::train_segmenter(images, masks, train_cfg);
    const fs::path model_path = detail::seg_model_path(cfg, view);
    model.save(model_path, cfg.config_hash, train_cfg.seed);
    std::ofstream hist(cfg.work_dir / "models" /
                           (std::string("seg_") + corpus::to_string(view) + "_history.csv"),
                       std::ios::trunc);
    hist << "epoch,train_loss,val_iou\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g", e, history[e].train_loss, history[e].val_iou);
      hist << buf << "\n";
    }
  }
  detail::write_run_manifest(cfg.work_dir / "models", cfg, "train-seg");
}

// Predict masks for every grid fragment and build the Mask / SegmOverDepth
// input clips.
inline void cmd_masks(const Config& cfg) {
  cfg.apply_runtime();
  const bool want_mask_input = cfg.grid_has(eval::InputType::mask);
  const bool want_sod_input = cfg.grid_has(eval::InputType::segm_over_depth);
  if (!want_mask_input && !want_sod_input) return;
  detail::require_artifact(cfg.manifest, "synth");
  const auto records = detail::grid_records(cfg, corpus::load_manifest_file(cfg.manifest));

  std::map<int, seg::SegModel> models;
  for (corpus::View view : cfg.views) {
    const fs::path path = detail::seg_model_path(cfg, view);
    detail::require_artifact(path, "train-seg");
    models.emplace(static_cast<int>(view), seg::SegModel::load(path));
  }

  parallel_chunks(records.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& rec = records[i];
      const seg::SegModel& model = models.at(static_cast<int>(rec.view));
      const ColorClip rgb = io::read_color_clip(detail::clip_dir(cfg, rec) / "rgb");
      MaskClip masks;
      masks.frame_rate = rgb.frame_rate;
      masks.frames.reserve(rgb.size());
      for (const auto& frame : rgb.frames) {
        masks.frames.push_back(seg::predict_mask(model, frame, cfg.seg_train.threshold));
      }
      io::write_mask_clip(cfg.work_dir / "masks" / rec.fragment_id, masks);
      if (want_mask_input) {
        io::write_color_clip(cfg.work_dir / "inputs" / "mask" / rec.fragment_id,
                             seg::build_mask_input(masks));
      }
      if (want_sod_input) {
        const fs::path hue_dir = cfg.work_dir / "depth_hue" / rec.fragment_id;
        detail::require_artifact(hue_dir, "encode-depth");
        const ColorClip hue = io::read_color_clip(hue_dir);
        io::write_color_clip(cfg.work_dir / "inputs" / "segmoverdepth" / rec.fragment_id,
                             seg::build_masked_depth_input(hue, masks));
      }
    }
  });
  detail::write_run_manifest(cfg.work_dir / "masks", cfg, "masks");
}

namespace detail {

inline fs::path input_clip_dir(const Config& cfg, const corpus::FragmentRecord& rec,
                               eval::InputType input) {
  switch (input) {
    case eval::InputType::rgb: return clip_dir(cfg, rec) / "rgb";
    case eval::InputType::depth: return cfg.work_dir / "depth_hue" / rec.fragment_id;
    case eval::InputType::mask: return cfg.work_dir / "inputs" / "mask" / rec.fragment_id;
    case eval::InputType::segm_over_depth:
      return cfg.work_dir / "inputs" / "segmoverdepth" / rec.fragment_id;
  }
  throw Error(ErrorCategory::internal, "unreachable input type");
}

inline const char* input_producer(eval::InputType input) {
  switch (input) {
    case eval::InputType::rgb: return "synth";
    case eval::InputType::depth: return "encode-depth";
    default: return "masks";
  }
}

}  // namespace detail

// Extract one feature vector per fragment for each grid input, split by
// train/val manifest. Records are processed in manifest order so feature
// files are byte-stable.
inline void cmd_features(const Config& cfg,
                         std::optional<eval::InputType> only_input = std::nullopt) {
  cfg.apply_runtime();
  const auto backend = detail::make_backend(cfg);
  detail::require_artifact(cfg.work_dir / "splits" / "train.csv", "split");
  detail::require_artifact(cfg.work_dir / "splits" / "val.csv", "split");
  for (eval::InputType input : cfg.inputs) {
    if (only_input && input != *only_input) continue;
    for (const char* split_name : {"train", "val"}) {
      const auto records = detail::grid_records(
          cfg, corpus::load_manifest_file(cfg.work_dir / "splits" / (std::string(split_name) + ".csv")));
      std::vector<vf::FeatureVector> features(records.size());
      parallel_chunks(records.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          const fs::path dir = detail::input_clip_dir(cfg, records[i], input);
          detail::require_artifact(dir, detail::input_producer(input));
          const ColorClip clip = io::read_color_clip(dir);
          features[i] = vf::extract_features(vf::preprocess(clip), *backend);
        }
      });
      vf::FeatureFile file;
      file.backend_name = backend->name();
      file.seed = backend->seed();
      for (std::size_t i = 0; i < records.size(); ++i) {
        file.entries.emplace_back(records[i].fragment_id, std::move(features[i]));
      }
      vf::write_feature_file(
          cfg.work_dir / "features" / eval::to_token(input) / (std::string(split_name) + ".csv"),
          file);
    }
    detail::write_run_manifest(cfg.work_dir / "features" / eval::to_token(input), cfg, "features");
  }
}

namespace detail {

struct CellData {
  std::vector<std::vector<float>> x;
  std::vector<corpus::BinaryLabel> y;
  std::vector<std::string> fragment_ids;
};

inline CellData load_cell(const Config& cfg, corpus::View view, eval::InputType input,
                          const char* split_name) {
  const fs::path feat_path =
      cfg.work_dir / "features" / eval::to_token(input) / (std::string(split_name) + ".csv");
  require_artifact(feat_path, "features");
  const fs::path split_path = cfg.work_dir / "splits" / (std::string(split_name) + ".csv");
  require_artifact(split_path, "split");
  std::map<std::string, corpus::FragmentRecord> by_id;
  for (const auto& r : corpus::load_manifest_file(split_path)) by_id.emplace(r.fragment_id, r);

  CellData data;
  for (auto& [id, fv] : vf::read_feature_file(feat_path).entries) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCategory::data, "feature file entry '" + id + "' not in " + split_path.string());
    }
    if (it->second.view != view) continue;
    data.x.push_back(std::move(fv.values));
    data.y.push_back(corpus::binary_label(it->second.score));
    data.fragment_ids.push_back(id);
  }
  return data;
}

}  // namespace detail

// Train the classifier head for each (view x input) grid cell.
inline void cmd_train_cls(const Config& cfg,
                          std::optional<eval::InputType> only_input = std::nullopt) {
  cfg.apply_runtime();
  for (corpus::View view : cfg.views) {
    for (eval::InputType input : cfg.inputs) {
      if (only_input && input != *only_input) continue;
      const auto train = detail::load_cell(cfg, view, input, "train");
      const auto val = detail::load_cell(cfg, view, input, "val");
      cls::ClsTrainConfig train_cfg = cfg.cls_train;
      train_cfg.seed = mix_seed(cfg.cls_train.seed,
                                (static_cast<uint64_t>(view) << 8) | static_cast<uint64_t>(input));
      auto [model, history] = cls::train_classifier(train.x, train.y, val.x, val.y, train_cfg,
                                                    cfg.cls_hidden1, cfg.cls_hidden2);
      model.save(detail::cls_model_path(cfg, view, input), cfg.config_hash, train_cfg.seed);
      std::ofstream hist(cfg.work_dir / "models" /
                             (std::string("cls_") + corpus::to_string(view) + "_" +
                              eval::to_token(input) + "_history.csv"),
                         std::ios::trunc);
      hist << "epoch,train_loss,val_accuracy\n";
      for (std::size_t e = 0; e < history.size(); ++e) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g", e, history[e].train_loss,
                      history[e].val_accuracy);
        hist << buf << "\n";
      }
    }
  }
  detail::write_run_manifest(cfg.work_dir / "models", cfg, "train-cls");
}

// Evaluate every grid cell on the validation split and emit the report in
// both aligned-text and machine-readable form.
inline eval::EvalReport cmd_evaluate(const Config& cfg) {
  cfg.apply_runtime();
  eval::EvalReport report;
  for (corpus::View view : cfg.views) {
    for (eval::InputType input : cfg.inputs) {
      const fs::path model_path = detail::cls_model_path(cfg, view, input);
      detail::require_artifact(model_path, "train-cls");
      const cls::ClassifierModel model = cls::ClassifierModel::load(model_path);
      const auto val = detail::load_cell(cfg, view, input, "val");
      if (val.x.empty()) {
        throw Error(ErrorCategory::data, std::string("no validation fragments for ") +
                                             corpus::to_string(view) + "/" + eval::to_token(input));
      }
      std::vector<corpus::BinaryLabel> predictions(val.x.size());
      parallel_chunks(val.x.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) predictions[i] = model.predict(val.x[i]);
      });
      report.set(view, input, eval::metrics(eval::confusion(predictions, val.y)));
    }
  }
  const fs::path dir = cfg.work_dir / "report";
  fs::create_directories(dir);
  {
    std::ofstream text(dir / "report.txt", std::ios::trunc);
    text << report.render_text();
    std::ofstream records(dir / "report.csv", std::ios::trunc);
    records << report.to_records();
  }
  detail::write_run_manifest(dir, cfg, "evaluate");
  return report;
}

// Full chain for the configured grid.
inline eval::EvalReport run_all(const Config& cfg) {
  cmd_synth(cfg);
  if (cfg.grid_has(eval::InputType::depth) || cfg.grid_has(eval::InputType::segm_over_depth)) {
    cmd_encode_depth(cfg);
  }
  cmd_split(cfg);
  cmd_train_seg(cfg);
  cmd_masks(cfg);
  cmd_features(cfg);
  cmd_train_cls(cfg);
  return cmd_evaluate(cfg);
}

}  // namespace lamedet::pipeline
