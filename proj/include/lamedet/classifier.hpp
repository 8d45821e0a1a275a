#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lamedet/common.hpp"
#include "lamedet/corpus.hpp"
#include "lamedet/nn.hpp"
#include "lamedet/parallel.hpp"
#include "lamedet/rng.hpp"

// Binary lameness head: three linear layers with rectifier activations and a
// final 2-way softmax, trained on cross-entropy with Adam and best
// validation-accuracy checkpoint selection. Production dims are
// 2304 -> 512 -> 64 -> 2; tests may shrink the hidden widths.

namespace lamedet::cls {

struct ClsTrainConfig {
  int epochs = 100;
  int batch_size = 20;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
};

class ClassifierModel {
 public:
  explicit ClassifierModel(int in_dim = 2304, int hidden1 = 512, int hidden2 = 64)
      : in_(in_dim), h1_(hidden1), h2_(hidden2) {
    if (in_dim < 1 || hidden1 < 1 || hidden2 < 1) {
      throw Error(ErrorCategory::config, "classifier dims must be positive");
    }
    w1_.assign(static_cast<std::size_t>(h1_) * in_, 0.0f);
    b1_.assign(static_cast<std::size_t>(h1_), 0.0f);
    w2_.assign(static_cast<std::size_t>(h2_) * h1_, 0.0f);
    b2_.assign(static_cast<std::size_t>(h2_), 0.0f);
    w3_.assign(static_cast<std::size_t>(2) * h2_, 0.0f);
    b3_.assign(2, 0.0f);
  }

  int in_dim() const { return in_; }

  void init_weights(uint64_t seed) {
    Rng rng(seed);
    auto he_fill = [&rng](std::vector<float>& w, int fan_in) {
      const double stddev = std::sqrt(2.0 / fan_in);
      for (auto& v : w) v = static_cast<float>(stddev * rng.normal());
    };
    he_fill(w1_, in_);
    he_fill(w2_, h1_);
    he_fill(w3_, h2_);
    std::fill(b1_.begin(), b1_.end(), 0.0f);
    std::fill(b2_.begin(), b2_.end(), 0.0f);
    std::fill(b3_.begin(), b3_.end(), 0.0f);
  }

  // (p_healthy, p_lame); probabilities sum to 1.
  std::array<double, 2> forward(std::span<const float> features) const {
    check_dim(features.size());
    std::vector<double> z1(static_cast<std::size_t>(h1_)), z2(static_cast<std::size_t>(h2_));
    std::array<double, 2> logits{};
    forward_raw(features, z1, z2, logits);
    return softmax2(logits);
  }

  corpus::BinaryLabel predict(std::span<const float> features) const {
    const auto p = forward(features);
    // exact tie goes to lame: screening favors sensitivity
    return p[1] >= p[0] ? corpus::BinaryLabel::lame : corpus::BinaryLabel::healthy;
  }

  struct Grads {
    std::vector<float> w1, b1, w2, b2, w3, b3;

    explicit Grads(const ClassifierModel& m)
        : w1(m.w1_.size(), 0.0f),
          b1(m.b1_.size(), 0.0f),
          w2(m.w2_.size(), 0.0f),
          b2(m.b2_.size(), 0.0f),
          w3(m.w3_.size(), 0.0f),
          b3(m.b3_.size(), 0.0f) {}

    void zero() {
      auto z = [](std::vector<float>& v) { std::fill(v.begin(), v.end(), 0.0f); };
      z(w1); z(b1); z(w2); z(b2); z(w3); z(b3);
    }

    void add(const Grads& o) {
      auto acc = [](std::vector<float>& a, const std::vector<float>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
      };
      acc(w1, o.w1); acc(b1, o.b1); acc(w2, o.w2); acc(b2, o.b2); acc(w3, o.w3); acc(b3, o.b3);
    }
  };

  // Mean cross-entropy of one sample (label 0 = healthy, 1 = lame).
  double sample_loss(std::span<const float> features, int label) const {
    check_dim(features.size());
    std::vector<double> z1(static_cast<std::size_t>(h1_)), z2(static_cast<std::size_t>(h2_));
    std::array<double, 2> logits{};
    forward_raw(features, z1, z2, logits);
    const auto p = softmax2(logits);
    return -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
  }

  // Loss plus gradients, scaled by `weight` (typically 1/batch).
  double sample_loss_and_grads(std::span<const float> features, int label, double weight,
                               Grads& grads) const {
    check_dim(features.size());
    std::vector<double> z1(static_cast<std::size_t>(h1_)), z2(static_cast<std::size_t>(h2_));
    std::array<double, 2> logits{};
    forward_raw(features, z1, z2, logits);
    const auto p = softmax2(logits);
    const double loss = -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));

    // softmax + cross-entropy backward
    std::array<double, 2> dlogits{p[0] * weight, p[1] * weight};
    dlogits[static_cast<std::size_t>(label)] -= weight;

    std::vector<double> dz2(static_cast<std::size_t>(h2_), 0.0);
    for (int o = 0; o < 2; ++o) {
      const double g = dlogits[static_cast<std::size_t>(o)];
      grads.b3[static_cast<std::size_t>(o)] += static_cast<float>(g);
      for (int j = 0; j < h2_; ++j) {
        grads.w3[static_cast<std::size_t>(o) * h2_ + j] += static_cast<float>(g * z2[static_cast<std::size_t>(j)]);
        dz2[static_cast<std::size_t>(j)] += g * w3_[static_cast<std::size_t>(o) * h2_ + j];
      }
    }
    std::vector<double> dz1(static_cast<std::size_t>(h1_), 0.0);
    for (int j = 0; j < h2_; ++j) {
      if (z2[static_cast<std::size_t>(j)] <= 0.0) continue;  // relu
      const double g = dz2[static_cast<std::size_t>(j)];
      grads.b2[static_cast<std::size_t>(j)] += static_cast<float>(g);
      for (int i = 0; i < h1_; ++i) {
        grads.w2[static_cast<std::size_t>(j) * h1_ + i] += static_cast<float>(g * z1[static_cast<std::size_t>(i)]);
        dz1[static_cast<std::size_t>(i)] += g * w2_[static_cast<std::size_t>(j) * h1_ + i];
      }
    }
    for (int j = 0; j < h1_; ++j) {
      if (z1[static_cast<std::size_t>(j)] <= 0.0) continue;
      const double g = dz1[static_cast<std::size_t>(j)];
      grads.b1[static_cast<std::size_t>(j)] += static_cast<float>(g);
      for (int i = 0; i < in_; ++i) {
        grads.w1[static_cast<std::size_t>(j) * in_ + i] += static_cast<float>(g * features[static_cast<std::size_t>(i)]);
      }
    }
    return loss;
  }

  std::vector<std::vector<float>*> param_arrays() { return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }

  std::vector<std::vector<float>> snapshot() const { return {w1_, b1_, w2_, b2_, w3_, b3_}; }

  void restore(const std::vector<std::vector<float>>& s) {
    w1_ = s[0]; b1_ = s[1]; w2_ = s[2]; b2_ = s[3]; w3_ = s[4]; b3_ = s[5];
  }

  void save(const std::filesystem::path& path, const std::string& fingerprint, uint64_t seed) const {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCategory::io, "cannot write model " + path.string());
    out << "LMDCLS1\n" << fingerprint << "\n" << seed << "\n" << in_ << " " << h1_ << " " << h2_ << "\n";
    for (const auto* a : {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}) {
      const uint64_t n = a->size();
      out.write(reinterpret_cast<const char*>(&n), sizeof(n));
      out.write(reinterpret_cast<const char*>(a->data()), static_cast<std::streamsize>(n * sizeof(float)));
    }
    if (!out) throw Error(ErrorCategory::io, "short write to " + path.string());
  }

  static ClassifierModel load(const std::filesystem::path& path, std::string* fingerprint = nullptr,
                              uint64_t* seed = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCategory::io, "cannot open model " + path.string());
    std::string magic, fp, seed_s;
    std::getline(in, magic);
    if (magic != "LMDCLS1") throw Error(ErrorCategory::data, "not a classifier model: " + path.string());
    std::getline(in, fp);
    std::getline(in, seed_s);
    int in_dim = 0, h1 = 0, h2 = 0;
    in >> in_dim >> h1 >> h2;
    in.get();  // newline
    if (fingerprint) *fingerprint = fp;
    if (seed) *seed = std::stoull(seed_s);
    ClassifierModel model(in_dim, h1, h2);
    for (auto* a : model.param_arrays()) {
      uint64_t n = 0;
      in.read(reinterpret_cast<char*>(&n), sizeof(n));
      if (!in || n != a->size()) throw Error(ErrorCategory::data, "model layout mismatch in " + path.string());
      in.read(reinterpret_cast<char*>(a->data()), static_cast<std::streamsize>(n * sizeof(float)));
      if (!in) throw Error(ErrorCategory::data, "truncated model " + path.string());
    }
    return model;
  }

 private:
  void check_dim(std::size_t got) const {
    if (got != static_cast<std::size_t>(in_)) {
      throw Error(ErrorCategory::data, "classifier: feature length " + std::to_string(got) +
                                           " does not match input dim " + std::to_string(in_));
    }
  }

  void forward_raw(std::span<const float> x, std::vector<double>& z1, std::vector<double>& z2,
                   std::array<double, 2>& logits) const {
    for (int j = 0; j < h1_; ++j) {
      double acc = b1_[static_cast<std::size_t>(j)];
      const float* row = w1_.data() + static_cast<std::size_t>(j) * in_;
      for (int i = 0; i < in_; ++i) acc += static_cast<double>(row[i]) * x[static_cast<std::size_t>(i)];
      z1[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
    }
    for (int j = 0; j < h2_; ++j) {
      double acc = b2_[static_cast<std::size_t>(j)];
      const float* row = w2_.data() + static_cast<std::size_t>(j) * h1_;
      for (int i = 0; i < h1_; ++i) acc += static_cast<double>(row[i]) * z1[static_cast<std::size_t>(i)];
      z2[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
    }
    for (int o = 0; o < 2; ++o) {
      double acc = b3_[static_cast<std::size_t>(o)];
      const float* row = w3_.data() + static_cast<std::size_t>(o) * h2_;
      for (int i = 0; i < h2_; ++i) acc += static_cast<double>(row[i]) * z2[static_cast<std::size_t>(i)];
      logits[static_cast<std::size_t>(o)] = acc;
    }
  }

  static std::array<double, 2> softmax2(const std::array<double, 2>& logits) {
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
  }

  int in_, h1_, h2_;
  std::vector<float> w1_, b1_, w2_, b2_, w3_, b3_;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

inline int label_index(corpus::BinaryLabel l) { return l == corpus::BinaryLabel::lame ? 1 : 0; }

// Minimizes cross-entropy with Adam over shuffled mini-batches and returns
// the checkpoint with the best validation accuracy plus the per-epoch
// history. Deterministic per seed.
inline std::pair<ClassifierModel, std::vector<EpochStats>> train_classifier(
    const std::vector<std::vector<float>>& train_x, const std::vector<corpus::BinaryLabel>& train_y,
    const std::vector<std::vector<float>>& val_x, const std::vector<corpus::BinaryLabel>& val_y,
    const ClsTrainConfig& config, int hidden1 = 512, int hidden2 = 64) {
  if (train_x.empty() || train_x.size() != train_y.size() || val_x.size() != val_y.size()) {
    throw Error(ErrorCategory::data, "train_classifier: bad dataset sizes");
  }
  if (config.epochs < 1 || config.batch_size < 1 || config.learning_rate <= 0) {
    throw Error(ErrorCategory::config, "train_classifier: bad config");
  }
  const std::size_t in_dim = train_x.front().size();
  for (const auto& x : train_x) {
    if (x.size() != in_dim) throw Error(ErrorCategory::data, "train_classifier: feature dims not uniform");
  }
  for (const auto& x : val_x) {
    if (x.size() != in_dim) throw Error(ErrorCategory::data, "train_classifier: feature dims not uniform");
  }
  std::size_t n_lame = 0;
  for (auto y : train_y) n_lame += y == corpus::BinaryLabel::lame ? 1 : 0;
  if (n_lame == 0 || n_lame == train_y.size()) {
    throw Error(ErrorCategory::data, "train_classifier: training set has a single class");
  }

  ClassifierModel model(static_cast<int>(in_dim), hidden1, hidden2);
  model.init_weights(mix_seed(config.seed, 11));

  ClassifierModel::Grads grads(model);
  nn::Adam adam(config.learning_rate);
  {
    auto params = model.param_arrays();
    std::vector<std::vector<float>*> grad_arrays = {&grads.w1, &grads.b1, &grads.w2,
                                                    &grads.b2, &grads.w3, &grads.b3};
    for (std::size_t i = 0; i < params.size(); ++i) adam.attach(params[i], grad_arrays[i]);
  }

  std::vector<EpochStats> history;
  double best_acc = -1.0;
  std::vector<std::vector<float>> best_weights = model.snapshot();

  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng epoch_rng(mix_seed(config.seed, 2000 + static_cast<uint64_t>(epoch)));
    epoch_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
      const std::size_t batch_n = batch_end - batch_start;

      const unsigned workers = worker_count(batch_n);
      std::vector<ClassifierModel::Grads> worker_grads(workers, ClassifierModel::Grads(model));
      std::vector<double> item_loss(batch_n, 0.0);
      parallel_chunks_indexed(batch_n, workers, [&](unsigned worker, std::size_t lo, std::size_t hi) {
        for (std::size_t bi = lo; bi < hi; ++bi) {
          const std::size_t idx = order[batch_start + bi];
          item_loss[bi] = model.sample_loss_and_grads(train_x[idx], label_index(train_y[idx]),
                                                      1.0 / static_cast<double>(batch_n),
                                                      worker_grads[worker]);
        }
      });
      grads.zero();
      for (const auto& wg : worker_grads) grads.add(wg);
      adam.step();
      for (double l : item_loss) epoch_loss += l;
    }

    double val_acc = 0.0;
    if (!val_x.empty()) {
      std::vector<uint8_t> correct(val_x.size(), 0);
      parallel_chunks(val_x.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          correct[i] = model.predict(val_x[i]) == val_y[i] ? 1 : 0;
        }
      });
      std::size_t n_correct = 0;
      for (uint8_t c : correct) n_correct += c;
      val_acc = static_cast<double>(n_correct) / static_cast<double>(val_x.size());
    }

    history.push_back({epoch_loss / static_cast<double>(order.size()), val_acc});
    if (val_acc > best_acc) {
      best_acc = val_acc;
      best_weights = model.snapshot();
    }
  }

  model.restore(best_weights);
  return {std::move(model), std::move(history)};
}

}  // namespace lamedet::cls
