#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "lamedet/common.hpp"
#include "lamedet/rng.hpp"

// Minimal dense NN kernels, written for clarity and bit-reproducibility:
// every loop has a fixed iteration order and gradient buffers are owned by
// the caller, so batches can be fanned out across workers and merged in a
// fixed order.

namespace lamedet::nn {

struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;  // CHW

  static Tensor3 zeros(int c, int h, int w) {
    Tensor3 t;
    t.c = c;
    t.h = h;
    t.w = w;
    t.v.assign(static_cast<std::size_t>(c) * h * w, 0.0f);
    return t;
  }

  float& at(int ci, int y, int x) {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }
  float at(int ci, int y, int x) const {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }
  float* plane(int ci) { return v.data() + static_cast<std::size_t>(ci) * h * w; }
  const float* plane(int ci) const { return v.data() + static_cast<std::size_t>(ci) * h * w; }
  std::size_t size() const { return v.size(); }
};

// 2-D convolution with odd kernel, same padding, stride 1 or 2.
class Conv2d {
 public:
  Conv2d(int in_c, int out_c, int k, int stride)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(k / 2) {
    w_.assign(static_cast<std::size_t>(out_c) * in_c * k * k, 0.0f);
    b_.assign(static_cast<std::size_t>(out_c), 0.0f);
  }

  void init_he(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_ * k_));
    for (auto& w : w_) w = static_cast<float>(stddev * rng.normal());
    for (auto& b : b_) b = 0.0f;
  }

  int out_dim(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }
  std::size_t weight_count() const { return w_.size(); }
  std::size_t bias_count() const { return b_.size(); }
  std::vector<float>& weights() { return w_; }
  std::vector<float>& bias() { return b_; }
  const std::vector<float>& weights() const { return w_; }
  const std::vector<float>& bias() const { return b_; }

  Tensor3 forward(const Tensor3& x) const {
    const int oh = out_dim(x.h), ow = out_dim(x.w);
    Tensor3 y = Tensor3::zeros(out_c_, oh, ow);
    for (int oc = 0; oc < out_c_; ++oc) {
      float* yp = y.plane(oc);
      for (int oy = 0; oy < oh; ++oy) {
        const int iy0 = oy * stride_ - pad_;
        for (int ox = 0; ox < ow; ++ox) {
          const int ix0 = ox * stride_ - pad_;
          float acc = b_[oc];
          for (int ic = 0; ic < in_c_; ++ic) {
            const float* wp = w_.data() + ((static_cast<std::size_t>(oc) * in_c_ + ic) * k_) * k_;
            const float* xp = x.plane(ic);
            for (int ky = 0; ky < k_; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= x.h) continue;
              const float* row = xp + static_cast<std::size_t>(iy) * x.w;
              const float* wrow = wp + static_cast<std::size_t>(ky) * k_;
              for (int kx = 0; kx < k_; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= x.w) continue;
                acc += wrow[kx] * row[ix];
              }
            }
          }
          yp[static_cast<std::size_t>(oy) * ow + ox] = acc;
        }
      }
    }
    return y;
  }

  // Accumulates weight/bias gradients into gw/gb and returns the input
  // gradient. Single-threaded by design: parallelism lives at the batch
  // level where each worker owns its own gradient buffers.
  Tensor3 backward(const Tensor3& x, const Tensor3& gy, std::span<float> gw,
                   std::span<float> gb) const {
    Tensor3 gx = Tensor3::zeros(x.c, x.h, x.w);
    const int oh = gy.h, ow = gy.w;
    for (int oc = 0; oc < out_c_; ++oc) {
      const float* gyp = gy.plane(oc);
      for (int oy = 0; oy < oh; ++oy) {
        const int iy0 = oy * stride_ - pad_;
        for (int ox = 0; ox < ow; ++ox) {
          const float g = gyp[static_cast<std::size_t>(oy) * ow + ox];
          if (g == 0.0f) continue;
          gb[oc] += g;
          const int ix0 = ox * stride_ - pad_;
          for (int ic = 0; ic < in_c_; ++ic) {
            const std::size_t wbase = ((static_cast<std::size_t>(oc) * in_c_ + ic) * k_) * k_;
            const float* xp = x.plane(ic);
            float* gxp = gx.plane(ic);
            for (int ky = 0; ky < k_; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= x.h) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= x.w) continue;
                const std::size_t xi = static_cast<std::size_t>(iy) * x.w + ix;
                gw[wbase + static_cast<std::size_t>(ky) * k_ + kx] += g * xp[xi];
                gxp[xi] += g * w_[wbase + static_cast<std::size_t>(ky) * k_ + kx];
              }
            }
          }
        }
      }
    }
    return gx;
  }

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  std::vector<float> w_;  // [oc][ic][ky][kx]
  std::vector<float> b_;
};

inline void relu_inplace(Tensor3& t) {
  for (auto& v : t.v) v = v > 0.0f ? v : 0.0f;
}

// g masked by the post-activation values (out > 0 iff pre > 0).
inline void relu_backward_inplace(const Tensor3& activated, Tensor3& g) {
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    if (activated.v[i] <= 0.0f) g.v[i] = 0.0f;
  }
}

inline void add_inplace(Tensor3& a, const Tensor3& b) {
  for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

// Nearest-neighbour upsample to an explicit target size (floor index map,
// exact for integer factors).
inline Tensor3 upsample_nearest(const Tensor3& src, int out_h, int out_w) {
  Tensor3 y = Tensor3::zeros(src.c, out_h, out_w);
  for (int c = 0; c < src.c; ++c) {
    const float* sp = src.plane(c);
    float* yp = y.plane(c);
    for (int oy = 0; oy < out_h; ++oy) {
      const int iy = static_cast<int>(static_cast<long>(oy) * src.h / out_h);
      for (int ox = 0; ox < out_w; ++ox) {
        const int ix = static_cast<int>(static_cast<long>(ox) * src.w / out_w);
        yp[static_cast<std::size_t>(oy) * out_w + ox] = sp[static_cast<std::size_t>(iy) * src.w + ix];
      }
    }
  }
  return y;
}

inline Tensor3 upsample_nearest_backward(const Tensor3& gy, int src_h, int src_w) {
  Tensor3 gx = Tensor3::zeros(gy.c, src_h, src_w);
  for (int c = 0; c < gy.c; ++c) {
    const float* gp = gy.plane(c);
    float* xp = gx.plane(c);
    for (int oy = 0; oy < gy.h; ++oy) {
      const int iy = static_cast<int>(static_cast<long>(oy) * src_h / gy.h);
      for (int ox = 0; ox < gy.w; ++ox) {
        const int ix = static_cast<int>(static_cast<long>(ox) * src_w / gy.w);
        xp[static_cast<std::size_t>(iy) * src_w + ix] += gp[static_cast<std::size_t>(oy) * gy.w + ox];
      }
    }
  }
  return gx;
}

// Adam with the canonical moment defaults (0.9, 0.999, 1e-8) and bias
// correction, applied over a fixed list of registered parameter arrays.
class Adam {
 public:
  explicit Adam(double learning_rate) : lr_(learning_rate) {}

  void attach(std::vector<float>* params, std::vector<float>* grads) {
    slots_.push_back({params, grads, std::vector<double>(params->size(), 0.0),
                      std::vector<double>(params->size(), 0.0)});
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (auto& s : slots_) {
      auto& p = *s.params;
      const auto& g = *s.grads;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * gi;
        s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * gi * gi;
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        p[i] = static_cast<float>(p[i] - lr_ * mhat / (std::sqrt(vhat) + kEps));
      }
    }
  }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  struct Slot {
    std::vector<float>* params;
    std::vector<float>* grads;
    std::vector<double> m, v;
  };

  double lr_;
  long t_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace lamedet::nn
