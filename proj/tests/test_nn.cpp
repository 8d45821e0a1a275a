#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lamedet/nn.hpp"
#include "lamedet/rng.hpp"

using namespace lamedet;
using namespace lamedet::nn;

namespace {

double sq_loss(const Tensor3& y) {
  double acc = 0.0;
  for (float v : y.v) acc += 0.5 * static_cast<double>(v) * v;
  return acc;
}

Tensor3 random_tensor(int c, int h, int w, Rng& rng) {
  Tensor3 t = Tensor3::zeros(c, h, w);
  for (auto& v : t.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// central difference with the actually-stored float perturbations
double central_diff(std::vector<float>& param, std::size_t i, const std::function<double()>& f) {
  const float orig = param[i];
  const float h = 1e-2f;
  param[i] = orig + h;
  const float hi_v = param[i];
  const double f_hi = f();
  param[i] = orig - h;
  const float lo_v = param[i];
  const double f_lo = f();
  param[i] = orig;
  return (f_hi - f_lo) / (static_cast<double>(hi_v) - static_cast<double>(lo_v));
}

}  // namespace

TEST_CASE("conv gradients match finite differences") {
  Rng rng(5);
  for (int stride : {1, 2}) {
    Conv2d conv(2, 3, 3, stride);
    conv.init_he(rng);
    Tensor3 x = random_tensor(2, 6, 5, rng);

    auto loss = [&]() { return sq_loss(conv.forward(x)); };

    const Tensor3 y = conv.forward(x);
    Tensor3 gy = y;  // dL/dy = y for the squared loss
    std::vector<float> gw(conv.weight_count(), 0.0f), gb(conv.bias_count(), 0.0f);
    const Tensor3 gx = conv.backward(x, gy, gw, gb);

    for (std::size_t i = 0; i < conv.weight_count(); i += 7) {
      const double num = central_diff(conv.weights(), i, loss);
      CHECK_THAT(gw[i], Catch::Matchers::WithinRel(num, 2e-2) ||
                            Catch::Matchers::WithinAbs(num, 1e-3));
    }
    for (std::size_t i = 0; i < conv.bias_count(); ++i) {
      const double num = central_diff(conv.bias(), i, loss);
      CHECK_THAT(gb[i], Catch::Matchers::WithinRel(num, 2e-2) ||
                            Catch::Matchers::WithinAbs(num, 1e-3));
    }
    for (std::size_t i = 0; i < x.v.size(); i += 5) {
      const double num = central_diff(x.v, i, loss);
      CHECK_THAT(gx.v[i], Catch::Matchers::WithinRel(num, 2e-2) ||
                              Catch::Matchers::WithinAbs(num, 1e-3));
    }
  }
}

TEST_CASE("conv output dims follow ceil division for stride 2") {
  Conv2d conv(1, 1, 3, 2);
  CHECK(conv.out_dim(128) == 64);
  CHECK(conv.out_dim(97) == 49);
  CHECK(conv.out_dim(96) == 48);
}

TEST_CASE("upsample backward is the adjoint of upsample") {
  Rng rng(9);
  const Tensor3 x = random_tensor(3, 5, 7, rng);
  const Tensor3 g = random_tensor(3, 11, 13, rng);
  const Tensor3 up = upsample_nearest(x, 11, 13);
  const Tensor3 down = upsample_nearest_backward(g, 5, 7);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < up.v.size(); ++i) lhs += static_cast<double>(up.v[i]) * g.v[i];
  for (std::size_t i = 0; i < x.v.size(); ++i) rhs += static_cast<double>(x.v[i]) * down.v[i];
  CHECK(lhs == Catch::Approx(rhs).margin(1e-5));
}

TEST_CASE("relu masks gradients by activation sign") {
  Tensor3 act = Tensor3::zeros(1, 1, 4);
  act.v = {0.5f, 0.0f, -0.0f, 2.0f};
  relu_inplace(act);
  Tensor3 g = Tensor3::zeros(1, 1, 4);
  g.v = {1.0f, 1.0f, 1.0f, 1.0f};
  relu_backward_inplace(act, g);
  CHECK(g.v[0] == 1.0f);
  CHECK(g.v[1] == 0.0f);
  CHECK(g.v[2] == 0.0f);
  CHECK(g.v[3] == 1.0f);
}

TEST_CASE("adam steps by the learning rate under a constant gradient") {
  std::vector<float> p = {1.0f};
  std::vector<float> g = {0.5f};
  Adam adam(0.1);
  adam.attach(&p, &g);
  adam.step();
  CHECK(p[0] == Catch::Approx(0.9).margin(1e-6));
  adam.step();
  CHECK(p[0] == Catch::Approx(0.8).margin(1e-6));
}
