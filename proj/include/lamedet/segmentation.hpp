#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "lamedet/clip.hpp"
#include "lamedet/common.hpp"
#include "lamedet/image.hpp"
#include "lamedet/nn.hpp"
#include "lamedet/parallel.hpp"
#include "lamedet/rng.hpp"

// Binary segmentation: a small encoder-decoder with lateral connections
// (pyramid-style), trained end-to-end on dice loss with best-validation-IoU
// checkpoint selection, plus the classical KNN background-subtraction
// baseline and the builders for the Mask / SegmOverDepth input videos.

namespace lamedet::seg {

// Per-pixel foreground probability map.
struct ProbMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

inline constexpr double kDiceEps = 1.0;

inline double dice_loss(const ProbMap& pred, const MaskFrame& target) {
  if (pred.width != target.width || pred.height != target.height) {
    throw Error(ErrorCategory::data, "dice_loss: shape mismatch");
  }
  double inter = 0.0, sum_p = 0.0, sum_t = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double p = pred.values[i];
    const double t = target.values[i];
    inter += p * t;
    sum_p += p;
    sum_t += t;
  }
  return 1.0 - (2.0 * inter + kDiceEps) / (sum_p + sum_t + kDiceEps);
}

// d(loss)/d(pred): with A = 2*inter + eps and B = sum_p + sum_t + eps,
// loss = 1 - A/B, so d/dp_i = (A - 2 t_i B) / B^2.
inline std::vector<float> dice_grad(const ProbMap& pred, const MaskFrame& target) {
  if (pred.width != target.width || pred.height != target.height) {
    throw Error(ErrorCategory::data, "dice_grad: shape mismatch");
  }
  double inter = 0.0, sum_p = 0.0, sum_t = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double p = pred.values[i];
    const double t = target.values[i];
    inter += p * t;
    sum_p += p;
    sum_t += t;
  }
  const double a = 2.0 * inter + kDiceEps;
  const double b = sum_p + sum_t + kDiceEps;
  std::vector<float> g(pred.values.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = static_cast<float>((a - 2.0 * target.values[i] * b) / (b * b));
  }
  return g;
}

// Intersection over union; 1 when both masks are empty.
inline double iou(const MaskFrame& pred, const MaskFrame& target) {
  if (!same_dims(pred, target)) throw Error(ErrorCategory::data, "iou: shape mismatch");
  require_binary(pred, "iou");
  require_binary(target, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const bool a = pred.values[i] != 0;
    const bool b = target.values[i] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct SegTrainConfig {
  int epochs = 40;
  int batch_size = 8;
  double learning_rate = 1e-4;
  bool augment_flip = true;
  bool augment_brightness = true;
  bool augment_rotation = true;  // +-10 degrees
  double validation_fraction = 0.2;
  double threshold = 0.5;
  uint64_t seed = 0;
};

namespace detail {

inline nn::Tensor3 to_tensor(const ColorFrame& frame) {
  nn::Tensor3 t = nn::Tensor3::zeros(3, frame.height, frame.width);
  const std::size_t n = frame.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    t.v[i] = frame.rgb[3 * i] / 255.0f;
    t.v[n + i] = frame.rgb[3 * i + 1] / 255.0f;
    t.v[2 * n + i] = frame.rgb[3 * i + 2] / 255.0f;
  }
  return t;
}

}  // namespace detail

// Encoder widths 16/32/64/128 (stride-2 stages) with 1x1 lateral connections
// summed into upsampled maps and a single-channel head: a desk-scale model
// that keeps the dense-output / end-to-end-trainable contract of the large
// pyramid networks.
class SegModel {
 public:
  static constexpr int kPyramidWidth = 32;
  static constexpr int kMinDim = 16;

  SegModel()
      : enc1_(3, 16, 3, 2),
        enc2_(16, 32, 3, 2),
        enc3_(32, 64, 3, 2),
        enc4_(64, 128, 3, 2),
        lat1_(16, kPyramidWidth, 1, 1),
        lat2_(32, kPyramidWidth, 1, 1),
        lat3_(64, kPyramidWidth, 1, 1),
        lat4_(128, kPyramidWidth, 1, 1),
        head_(kPyramidWidth, 1, 3, 1) {}

  void init_weights(uint64_t seed) {
    Rng rng(seed);
    for (nn::Conv2d* layer : layers()) layer->init_he(rng);
  }

  std::vector<nn::Conv2d*> layers() {
    return {&enc1_, &enc2_, &enc3_, &enc4_, &lat1_, &lat2_, &lat3_, &lat4_, &head_};
  }
  std::vector<const nn::Conv2d*> layers() const {
    return {&enc1_, &enc2_, &enc3_, &enc4_, &lat1_, &lat2_, &lat3_, &lat4_, &head_};
  }

  struct Trace {
    nn::Tensor3 x, e1, e2, e3, e4, p1, p2, p3, p4;
    ProbMap prob;
  };

  Trace forward_trace(nn::Tensor3 x) const {
    Trace t;
    t.x = std::move(x);
    t.e1 = enc1_.forward(t.x);
    nn::relu_inplace(t.e1);
    t.e2 = enc2_.forward(t.e1);
    nn::relu_inplace(t.e2);
    t.e3 = enc3_.forward(t.e2);
    nn::relu_inplace(t.e3);
    t.e4 = enc4_.forward(t.e3);
    nn::relu_inplace(t.e4);
    t.p4 = lat4_.forward(t.e4);
    t.p3 = lat3_.forward(t.e3);
    nn::add_inplace(t.p3, nn::upsample_nearest(t.p4, t.p3.h, t.p3.w));
    t.p2 = lat2_.forward(t.e2);
    nn::add_inplace(t.p2, nn::upsample_nearest(t.p3, t.p2.h, t.p2.w));
    t.p1 = lat1_.forward(t.e1);
    nn::add_inplace(t.p1, nn::upsample_nearest(t.p2, t.p1.h, t.p1.w));
    nn::Tensor3 logit_half = head_.forward(t.p1);
    nn::Tensor3 logits = nn::upsample_nearest(logit_half, t.x.h, t.x.w);
    t.prob.width = t.x.w;
    t.prob.height = t.x.h;
    t.prob.values.resize(logits.v.size());
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
      t.prob.values[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(logits.v[i]))));
    }
    return t;
  }

  ProbMap forward(const ColorFrame& frame) const {
    check_dims(frame.width, frame.height);
    return forward_trace(detail::to_tensor(frame)).prob;
  }

  // Gradient buffers, one pair (weights, bias) per layer in layers() order.
  struct Grads {
    std::vector<std::vector<float>> arrays;

    explicit Grads(const SegModel& model) {
      for (const nn::Conv2d* layer : model.layers()) {
        arrays.emplace_back(layer->weight_count(), 0.0f);
        arrays.emplace_back(layer->bias_count(), 0.0f);
      }
    }

    void zero() {
      for (auto& a : arrays) std::fill(a.begin(), a.end(), 0.0f);
    }

    void add(const Grads& other) {
      for (std::size_t i = 0; i < arrays.size(); ++i) {
        for (std::size_t j = 0; j < arrays[i].size(); ++j) arrays[i][j] += other.arrays[i][j];
      }
    }
  };

  void backward(const Trace& t, const std::vector<float>& g_prob, Grads& grads) const {
    auto span_of = [&grads](std::size_t layer_idx, bool bias) {
      return std::span<float>(grads.arrays[2 * layer_idx + (bias ? 1 : 0)]);
    };
    // sigmoid backward
    nn::Tensor3 g_logits = nn::Tensor3::zeros(1, t.prob.height, t.prob.width);
    for (std::size_t i = 0; i < g_prob.size(); ++i) {
      const float p = t.prob.values[i];
      g_logits.v[i] = g_prob[i] * p * (1.0f - p);
    }
    nn::Tensor3 g_half = nn::upsample_nearest_backward(g_logits, t.p1.h, t.p1.w);
    nn::Tensor3 g_p1 = head_.backward(t.p1, g_half, span_of(8, false), span_of(8, true));

    nn::Tensor3 g_e1 = lat1_.backward(t.e1, g_p1, span_of(4, false), span_of(4, true));
    nn::Tensor3 g_p2 = nn::upsample_nearest_backward(g_p1, t.p2.h, t.p2.w);
    nn::Tensor3 g_e2 = lat2_.backward(t.e2, g_p2, span_of(5, false), span_of(5, true));
    nn::Tensor3 g_p3 = nn::upsample_nearest_backward(g_p2, t.p3.h, t.p3.w);
    nn::Tensor3 g_e3 = lat3_.backward(t.e3, g_p3, span_of(6, false), span_of(6, true));
    nn::Tensor3 g_p4 = nn::upsample_nearest_backward(g_p3, t.p4.h, t.p4.w);
    nn::Tensor3 g_e4 = lat4_.backward(t.e4, g_p4, span_of(7, false), span_of(7, true));

    nn::relu_backward_inplace(t.e4, g_e4);
    nn::add_inplace(g_e3, enc4_.backward(t.e3, g_e4, span_of(3, false), span_of(3, true)));
    nn::relu_backward_inplace(t.e3, g_e3);
    nn::add_inplace(g_e2, enc3_.backward(t.e2, g_e3, span_of(2, false), span_of(2, true)));
    nn::relu_backward_inplace(t.e2, g_e2);
    nn::add_inplace(g_e1, enc2_.backward(t.e1, g_e2, span_of(1, false), span_of(1, true)));
    nn::relu_backward_inplace(t.e1, g_e1);
    enc1_.backward(t.x, g_e1, span_of(0, false), span_of(0, true));
  }

  std::vector<std::vector<float>> snapshot() const {
    std::vector<std::vector<float>> s;
    for (const nn::Conv2d* layer : layers()) {
      s.push_back(layer->weights());
      s.push_back(layer->bias());
    }
    return s;
  }

  void restore(const std::vector<std::vector<float>>& s) {
    auto ls = layers();
    for (std::size_t i = 0; i < ls.size(); ++i) {
      ls[i]->weights() = s[2 * i];
      ls[i]->bias() = s[2 * i + 1];
    }
  }

  void save(const std::filesystem::path& path, const std::string& fingerprint,
            uint64_t seed) const {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCategory::io, "cannot write model " + path.string());
    out << "LMDSEG1\n" << fingerprint << "\n" << seed << "\n";
    for (const nn::Conv2d* layer : layers()) {
      write_array(out, layer->weights());
      write_array(out, layer->bias());
    }
    if (!out) throw Error(ErrorCategory::io, "short write to " + path.string());
  }

  static SegModel load(const std::filesystem::path& path, std::string* fingerprint = nullptr,
                       uint64_t* seed = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCategory::io, "cannot open model " + path.string());
    std::string magic, fp, seed_s;
    std::getline(in, magic);
    if (magic != "LMDSEG1") throw Error(ErrorCategory::data, "not a segmentation model: " + path.string());
    std::getline(in, fp);
    std::getline(in, seed_s);
    if (fingerprint) *fingerprint = fp;
    if (seed) *seed = std::stoull(seed_s);
    SegModel model;
    for (nn::Conv2d* layer : model.layers()) {
      read_array(in, layer->weights(), path);
      read_array(in, layer->bias(), path);
    }
    return model;
  }

  static void check_dims(int width, int height) {
    if (width < kMinDim || height < kMinDim) {
      throw Error(ErrorCategory::data, "segmentation input too small: " + std::to_string(width) +
                                           "x" + std::to_string(height));
    }
  }

 private:
  static void write_array(std::ofstream& out, const std::vector<float>& a) {
    const uint64_t n = a.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(n * sizeof(float)));
  }

  static void read_array(std::ifstream& in, std::vector<float>& a, const std::filesystem::path& path) {
    uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n != a.size()) {
      throw Error(ErrorCategory::data, "model layout mismatch in " + path.string());
    }
    in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw Error(ErrorCategory::data, "truncated model " + path.string());
  }

  nn::Conv2d enc1_, enc2_, enc3_, enc4_;
  nn::Conv2d lat1_, lat2_, lat3_, lat4_;
  nn::Conv2d head_;
};

inline MaskFrame predict_mask(const SegModel& model, const ColorFrame& frame,
                              double threshold = 0.5) {
  const ProbMap prob = model.forward(frame);
  MaskFrame mask = MaskFrame::zeros(prob.width, prob.height);
  for (std::size_t i = 0; i < prob.values.size(); ++i) {
    mask.values[i] = prob.values[i] > threshold ? 1 : 0;
  }
  return mask;
}

// --- training-time augmentation -------------------------------------------

namespace detail {

inline void flip_horizontal(ColorFrame& f) {
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width / 2; ++x) {
      for (int c = 0; c < 3; ++c) std::swap(f.px(x, y)[c], f.px(f.width - 1 - x, y)[c]);
    }
  }
}

inline void flip_horizontal(MaskFrame& m) {
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width / 2; ++x) std::swap(m.at(x, y), m.at(m.width - 1 - x, y));
  }
}

inline void brightness(ColorFrame& f, double gain) {
  for (auto& v : f.rgb) {
    v = static_cast<uint8_t>(std::clamp(std::lround(v * gain), 0l, 255l));
  }
}

inline ColorFrame rotate(const ColorFrame& f, double angle_deg) {
  const double a = angle_deg * 3.14159265358979323846 / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cx = (f.width - 1) / 2.0, cy = (f.height - 1) / 2.0;
  ColorFrame out = ColorFrame::filled(f.width, f.height, 0, 0, 0);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      // inverse map, bilinear sample with edge clamp
      const double dx = x - cx, dy = y - cy;
      const double sx = std::clamp(cx + ca * dx + sa * dy, 0.0, f.width - 1.0);
      const double sy = std::clamp(cy - sa * dx + ca * dy, 0.0, f.height - 1.0);
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, f.width - 1), y1 = std::min(y0 + 1, f.height - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fx) * (1 - fy) * f.px(x0, y0)[c] + fx * (1 - fy) * f.px(x1, y0)[c] +
                         (1 - fx) * fy * f.px(x0, y1)[c] + fx * fy * f.px(x1, y1)[c];
        out.px(x, y)[c] = static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
      }
    }
  }
  return out;
}

inline MaskFrame rotate(const MaskFrame& m, double angle_deg) {
  const double a = angle_deg * 3.14159265358979323846 / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cx = (m.width - 1) / 2.0, cy = (m.height - 1) / 2.0;
  MaskFrame out = MaskFrame::zeros(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const long sx = std::lround(cx + ca * dx + sa * dy);
      const long sy = std::lround(cy - sa * dx + ca * dy);
      if (sx < 0 || sx >= m.width || sy < 0 || sy >= m.height) continue;
      out.at(x, y) = m.at(static_cast<int>(sx), static_cast<int>(sy));
    }
  }
  return out;
}

}  // namespace detail

struct EpochStats {
  double train_loss = 0.0;
  double val_iou = 0.0;
};

// Fine-tunes the model end-to-end on dice loss with Adam, applying the
// configured augmentations to training pairs only, and returns the
// checkpoint with the best validation IoU. Bit-reproducible for a fixed
// seed regardless of worker count.
inline std::pair<SegModel, std::vector<EpochStats>> train_segmenter(
    const std::vector<ColorFrame>& images, const std::vector<MaskFrame>& gt_masks,
    const SegTrainConfig& config) {
  if (images.size() != gt_masks.size()) {
    throw Error(ErrorCategory::data, "train_segmenter: image/mask count mismatch");
  }
  if (images.size() < 2) {
    throw Error(ErrorCategory::data, "train_segmenter: need at least 2 annotated images");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw Error(ErrorCategory::config, "train_segmenter: epochs and batch_size must be >= 1");
  }
  if (config.validation_fraction <= 0.0 || config.validation_fraction >= 1.0) {
    throw Error(ErrorCategory::config, "train_segmenter: validation fraction must be in (0,1)");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width != gt_masks[i].width || images[i].height != gt_masks[i].height) {
      throw Error(ErrorCategory::data, "train_segmenter: image/mask dims mismatch at index " +
                                           std::to_string(i));
    }
    SegModel::check_dims(images[i].width, images[i].height);
    require_binary(gt_masks[i], "train_segmenter");
  }

  const std::size_t n = images.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(mix_seed(config.seed, 1));
  split_rng.shuffle(order);
  std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(
                                                   config.validation_fraction * static_cast<double>(n))));
  if (n_val >= n) n_val = n - 1;
  std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<long>(n_val));
  std::vector<std::size_t> val_idx(order.end() - static_cast<long>(n_val), order.end());

  SegModel model;
  model.init_weights(mix_seed(config.seed, 2));

  SegModel::Grads grads(model);
  nn::Adam adam(config.learning_rate);
  {
    auto layers = model.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      adam.attach(&layers[i]->weights(), &grads.arrays[2 * i]);
      adam.attach(&layers[i]->bias(), &grads.arrays[2 * i + 1]);
    }
  }

  std::vector<EpochStats> history;
  double best_iou = -1.0;
  std::vector<std::vector<float>> best_weights = model.snapshot();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng epoch_rng(mix_seed(config.seed, 1000 + static_cast<uint64_t>(epoch)));
    std::vector<std::size_t> epoch_order = train_idx;
    epoch_rng.shuffle(epoch_order);

    double epoch_loss = 0.0;
    for (std::size_t batch_start = 0; batch_start < epoch_order.size();
         batch_start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t batch_end =
          std::min(epoch_order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
      const std::size_t batch_n = batch_end - batch_start;

      const unsigned workers = worker_count(batch_n);
      std::vector<SegModel::Grads> worker_grads(workers, SegModel::Grads(model));
      std::vector<double> item_loss(batch_n, 0.0);

      parallel_chunks_indexed(batch_n, workers, [&](unsigned worker, std::size_t lo, std::size_t hi) {
        SegModel::Grads& wg = worker_grads[worker];
        for (std::size_t bi = lo; bi < hi; ++bi) {
          const std::size_t pos = batch_start + bi;
          const std::size_t idx = epoch_order[pos];
          ColorFrame img = images[idx];
          MaskFrame mask = gt_masks[idx];
          Rng aug_rng(mix_seed(config.seed,
                               0xA0000000ULL + static_cast<uint64_t>(epoch) * 1000003ULL + pos));
          if (config.augment_flip && aug_rng.chance(0.5)) {
            detail::flip_horizontal(img);
            detail::flip_horizontal(mask);
          }
          if (config.augment_brightness) {
            detail::brightness(img, aug_rng.uniform(0.8, 1.2));
          }
          if (config.augment_rotation) {
            const double angle = aug_rng.uniform(-10.0, 10.0);
            img = detail::rotate(img, angle);
            mask = detail::rotate(mask, angle);
          }
          SegModel::Trace trace = model.forward_trace(detail::to_tensor(img));
          item_loss[bi] = dice_loss(trace.prob, mask);
          std::vector<float> g = dice_grad(trace.prob, mask);
          const float scale = 1.0f / static_cast<float>(batch_n);
          for (auto& v : g) v *= scale;
          model.backward(trace, g, wg);
        }
      });

      grads.zero();
      for (const auto& wg : worker_grads) grads.add(wg);
      adam.step();
      for (double l : item_loss) epoch_loss += l;
    }

    // validation IoU on un-augmented images
    std::vector<double> val_ious(val_idx.size(), 0.0);
    parallel_chunks(val_idx.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const MaskFrame pred = predict_mask(model, images[val_idx[i]], config.threshold);
        val_ious[i] = iou(pred, gt_masks[val_idx[i]]);
      }
    });
    double val_iou = 0.0;
    for (double v : val_ious) val_iou += v;
    val_iou /= static_cast<double>(val_ious.size());

    history.push_back({epoch_loss / static_cast<double>(epoch_order.size()), val_iou});
    if (val_iou > best_iou) {
      best_iou = val_iou;
      best_weights = model.snapshot();
    }
  }

  model.restore(best_weights);
  return {std::move(model), std::move(history)};
}

// --- classical baseline ----------------------------------------------------

struct BackgroundParams {
  int k = 2;                    // matches needed to call a pixel background
  double color_threshold = 25.0;  // per-channel distance scale
  int refresh_period = 0;       // 0: use history_length
};

// Per-pixel temporal background model over a sliding history: a pixel is
// foreground when fewer than k stored samples lie within the color threshold.
// Samples are stored when a pixel is classified background, plus a periodic
// unconditional refresh so scene changes are eventually absorbed (which also
// punches the holes in slow-moving foreground that make this a baseline, not
// a solution). Warm-up frames yield empty masks.
inline MaskClip background_baseline(const ColorClip& clip, std::size_t history_length,
                                    const BackgroundParams& params = {}) {
  if (history_length < 1) {
    throw Error(ErrorCategory::config, "background_baseline: history_length must be >= 1");
  }
  if (clip.size() <= history_length) {
    throw Error(ErrorCategory::data, "background_baseline: clip shorter than history");
  }
  require_uniform_dims(clip, "background_baseline");
  const int w = clip.width(), h = clip.height();
  const std::size_t npx = static_cast<std::size_t>(w) * h;
  const std::size_t refresh =
      params.refresh_period > 0 ? static_cast<std::size_t>(params.refresh_period) : history_length;
  const double thr2 = 3.0 * params.color_threshold * params.color_threshold;

  std::vector<uint8_t> history(npx * history_length * 3);
  MaskClip out;
  out.frame_rate = clip.frame_rate;
  out.frames.reserve(clip.size());

  for (std::size_t t = 0; t < clip.size(); ++t) {
    const ColorFrame& frame = clip.frames[t];
    MaskFrame mask = MaskFrame::zeros(w, h);
    const std::size_t slot = t % history_length;
    if (t < history_length) {
      // warm-up: fill the model, emit empty masks
      parallel_chunks(npx, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          uint8_t* dst = history.data() + (i * history_length + slot) * 3;
          dst[0] = frame.rgb[3 * i];
          dst[1] = frame.rgb[3 * i + 1];
          dst[2] = frame.rgb[3 * i + 2];
        }
      });
      out.frames.push_back(std::move(mask));
      continue;
    }
    const bool force_refresh = (t % refresh) == 0;
    // the refresh slot rotates independently so repeated refreshes do not
    // keep overwriting one slot when the period divides the history length
    const std::size_t refresh_slot = (t / refresh) % history_length;
    parallel_chunks(npx, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const uint8_t* px = frame.rgb.data() + 3 * i;
        const uint8_t* hist = history.data() + i * history_length * 3;
        int matches = 0;
        for (std::size_t s = 0; s < history_length && matches < params.k; ++s) {
          const double dr = static_cast<double>(px[0]) - hist[3 * s];
          const double dg = static_cast<double>(px[1]) - hist[3 * s + 1];
          const double db = static_cast<double>(px[2]) - hist[3 * s + 2];
          if (dr * dr + dg * dg + db * db <= thr2) ++matches;
        }
        const bool foreground = matches < params.k;
        mask.values[i] = foreground ? 1 : 0;
        if (!foreground || force_refresh) {
          const std::size_t target = foreground ? refresh_slot : slot;
          uint8_t* dst = history.data() + (i * history_length + target) * 3;
          dst[0] = px[0];
          dst[1] = px[1];
          dst[2] = px[2];
        }
      }
    });
    out.frames.push_back(std::move(mask));
  }
  return out;
}

// --- input builders ---------------------------------------------------------

// Mask input video: foreground white, background black, replicated to three
// channels so the clip satisfies the feature extractor's input contract.
inline ColorClip build_mask_input(const MaskClip& masks) {
  ColorClip out;
  out.frame_rate = masks.frame_rate;
  out.frames.reserve(masks.size());
  for (const auto& m : masks.frames) {
    ColorFrame f = ColorFrame::filled(m.width, m.height, 0, 0, 0);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      if (m.values[i]) {
        f.rgb[3 * i] = f.rgb[3 * i + 1] = f.rgb[3 * i + 2] = 255;
      }
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

// SegmOverDepth input: hue-encoded depth kept inside the mask, black outside.
inline ColorClip build_masked_depth_input(const ColorClip& depth_color, const MaskClip& masks) {
  if (depth_color.size() != masks.size()) {
    throw Error(ErrorCategory::data, "build_masked_depth_input: clip length mismatch");
  }
  ColorClip out;
  out.frame_rate = depth_color.frame_rate;
  out.frames.reserve(depth_color.size());
  for (std::size_t i = 0; i < depth_color.size(); ++i) {
    const ColorFrame& src = depth_color.frames[i];
    const MaskFrame& m = masks.frames[i];
    if (src.width != m.width || src.height != m.height) {
      throw Error(ErrorCategory::data, "build_masked_depth_input: frame dims mismatch at index " +
                                           std::to_string(i));
    }
    ColorFrame f = src;
    for (std::size_t p = 0; p < m.values.size(); ++p) {
      if (!m.values[p]) {
        f.rgb[3 * p] = f.rgb[3 * p + 1] = f.rgb[3 * p + 2] = 0;
      }
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace lamedet::seg
