#include <doctest.h>

#include "imghop/layers.hpp"
#include "test_helpers.hpp"

using namespace imghop;
using test::max_abs_diff;
using test::random_tensor;
using test::rel_err;

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

// Direct quadruple-loop convolution, independent of the im2col path.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w,
                          const Tensor<double>& bias, int stride, int pt, int pl, int pb, int pr,
                          PadMode mode) {
  int k = w.h();
  int ho = (x.h() + pt + pb - k) / stride + 1;
  int wo = (x.w() + pl + pr - k) / stride + 1;
  Tensor<double> y(x.n(), w.n(), ho, wo);
  for (int b = 0; b < x.n(); ++b)
    for (int co = 0; co < w.n(); ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double s = bias.data()[co];
          for (int ci = 0; ci < x.c(); ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                int iy = oy * stride - pt + ky;
                int ix = ox * stride - pl + kx;
                double v = 0;
                if (mode == PadMode::kReflect) {
                  v = x.at(b, ci, reflect(iy, x.h()), reflect(ix, x.w()));
                } else if (iy >= 0 && iy < x.h() && ix >= 0 && ix < x.w()) {
                  v = x.at(b, ci, iy, ix);
                }
                s += v * w.at(co, ci, ky, kx);
              }
          y.at(b, co, oy, ox) = s;
        }
  return y;
}

// Direct transposed convolution: scatter every input element through the kernel.
Tensor<double> naive_conv_transpose(const Tensor<double>& x, const Tensor<double>& w,
                                    const Tensor<double>& bias, int stride, int pad, int out_pad) {
  int k = w.h();
  int out_ch = w.c();
  int ho = (x.h() - 1) * stride - 2 * pad + k + out_pad;
  int wo = (x.w() - 1) * stride - 2 * pad + k + out_pad;
  Tensor<double> y(x.n(), out_ch, ho, wo);
  for (int b = 0; b < x.n(); ++b) {
    for (int co = 0; co < out_ch; ++co)
      for (int q = 0; q < ho * wo; ++q) y.plane(b, co)[q] = bias.data()[co];
    for (int ci = 0; ci < x.c(); ++ci)
      for (int iy = 0; iy < x.h(); ++iy)
        for (int ix = 0; ix < x.w(); ++ix)
          for (int co = 0; co < out_ch; ++co)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                int oy = iy * stride - pad + ky;
                int ox = ix * stride - pad + kx;
                if (oy >= 0 && oy < ho && ox >= 0 && ox < wo)
                  y.at(b, co, oy, ox) += x.at(b, ci, iy, ix) * w.at(ci, co, ky, kx);
              }
  }
  return y;
}

// Scalar probe loss sum(c .* y) so dL/dy = c is smooth.
double probe_loss(const Tensor<double>& y, const Tensor<double>& c) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * c.data()[i];
  return s;
}

// Central-difference gradient check of a layer's parameter and input grads.
void check_layer_gradients(Layer<double>& layer, const Tensor<double>& x, Rng& rng,
                           double tol = 1e-6) {
  std::unique_ptr<Layer<double>::Cache> cache;
  Tensor<double> y = layer.forward(x, &cache);
  Tensor<double> c = random_tensor<double>(y.n(), y.c(), y.h(), y.w(), rng);

  std::vector<Param<double>*> params;
  layer.collect_params(params);
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->id = static_cast<int>(i);
  GradStore<double> grads;
  grads.init_like(params);
  Tensor<double> gx = layer.backward(c, *cache, &grads, true);

  const double h = 1e-5;
  // parameter gradients
  for (Param<double>* p : params) {
    for (std::size_t trial = 0; trial < 12; ++trial) {
      std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(p->value.size()) - 1));
      double orig = p->value.data()[i];
      p->value.data()[i] = orig + h;
      double lp = probe_loss(layer.forward(x, nullptr), c);
      p->value.data()[i] = orig - h;
      double lm = probe_loss(layer.forward(x, nullptr), c);
      p->value.data()[i] = orig;
      double fd = (lp - lm) / (2 * h);
      double analytic = grads.grad(p->id).data()[i];
      // Both vanishing (e.g. a conv bias normalized away downstream): FD
      // cannot resolve below its own noise there.
      if (std::abs(analytic) < 1e-7 && std::abs(fd) < 1e-7) continue;
      CAPTURE(p->name);
      CHECK(rel_err(analytic, fd) < tol);
    }
  }
  // input gradients
  for (std::size_t trial = 0; trial < 12; ++trial) {
    std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.size()) - 1));
    Tensor<double> xp = x;
    xp.data()[i] += h;
    double lp = probe_loss(layer.forward(xp, nullptr), c);
    xp.data()[i] -= 2 * h;
    double lm = probe_loss(layer.forward(xp, nullptr), c);
    double fd = (lp - lm) / (2 * h);
    CHECK(rel_err(gx.data()[i], fd) < tol);
  }
}

}  // namespace

TEST_CASE("conv2d forward matches direct convolution") {
  Rng rng(11);
  struct Case {
    int stride, pt, pl, pb, pr;
    PadMode mode;
  };
  for (const Case& cs : {Case{1, 3, 3, 3, 3, PadMode::kReflect}, Case{2, 1, 1, 1, 1, PadMode::kZero},
                         Case{1, 1, 1, 2, 2, PadMode::kZero}, Case{1, 1, 1, 1, 1, PadMode::kReflect},
                         Case{1, 2, 2, 2, 2, PadMode::kZero}}) {
    int k = cs.pt == 3 ? 7 : (cs.pt == 2 ? 5 : (cs.pb == 2 ? 4 : 3));
    Conv2d<double> conv("t.conv", 3, 5, k, cs.stride, cs.pt, cs.pl, cs.pb, cs.pr, cs.mode, rng);
    std::vector<Param<double>*> params;
    conv.collect_params(params);
    Tensor<double> x = random_tensor<double>(2, 3, 8, 8, rng);
    Tensor<double> y = conv.forward(x, nullptr);
    Tensor<double> ref = naive_conv(x, params[0]->value, params[1]->value, cs.stride, cs.pt, cs.pl,
                                    cs.pb, cs.pr, cs.mode);
    REQUIRE(y.same_shape(ref));
    CHECK(max_abs_diff(y, ref) < 1e-12);
  }
}

TEST_CASE("conv_transpose2d forward matches direct scatter") {
  Rng rng(12);
  ConvTranspose2d<double> up("t.up", 4, 2, 3, 2, 1, 1, rng);
  std::vector<Param<double>*> params;
  up.collect_params(params);
  Tensor<double> x = random_tensor<double>(2, 4, 5, 5, rng);
  Tensor<double> y = up.forward(x, nullptr);
  Tensor<double> ref = naive_conv_transpose(x, params[0]->value, params[1]->value, 2, 1, 1);
  REQUIRE(y.same_shape(ref));
  CHECK(y.h() == 10);
  CHECK(max_abs_diff(y, ref) < 1e-12);
}

TEST_CASE("instance norm normalizes per image and channel") {
  Rng rng(13);
  InstanceNorm2d<double> norm;
  Tensor<double> x = random_tensor<double>(3, 2, 6, 6, rng, -2.0, 5.0);
  Tensor<double> y = norm.forward(x, nullptr);
  for (int b = 0; b < 3; ++b)
    for (int c = 0; c < 2; ++c) {
      double mu = 0, var = 0;
      const double* p = y.plane(b, c);
      for (int q = 0; q < 36; ++q) mu += p[q];
      mu /= 36;
      for (int q = 0; q < 36; ++q) var += (p[q] - mu) * (p[q] - mu);
      var /= 36;
      CHECK(std::abs(mu) < 1e-12);
      CHECK(std::abs(var - 1.0) < 1e-4);  // eps slack
    }
}

TEST_CASE("instance norm constant input stays finite") {
  Rng rng(14);
  InstanceNorm2d<double> norm;
  Tensor<double> x(1, 2, 4, 4);
  x.fill(0.7);
  Tensor<double> y = norm.forward(x, nullptr);
  CHECK(all_finite(y));
  CHECK(std::abs(y.data()[0]) < 1e-9);
}

TEST_CASE("layer gradients match finite differences") {
  Rng rng(15);
  Tensor<double> x = random_tensor<double>(2, 3, 8, 8, rng);

  SUBCASE("conv stride 1 reflect") {
    Conv2d<double> l("t", 3, 4, 3, 1, 1, PadMode::kReflect, rng);
    check_layer_gradients(l, x, rng);
  }
  SUBCASE("conv stride 2 zero") {
    Conv2d<double> l("t", 3, 4, 3, 2, 1, PadMode::kZero, rng);
    check_layer_gradients(l, x, rng);
  }
  SUBCASE("conv 4x4 asymmetric pad") {
    Conv2d<double> l("t", 3, 4, 4, 1, 1, 1, 2, 2, PadMode::kZero, rng);
    check_layer_gradients(l, x, rng);
  }
  SUBCASE("conv 7x7 reflect (direct path)") {
    Conv2d<double> l("t", 3, 4, 7, 1, 3, PadMode::kReflect, rng);
    check_layer_gradients(l, x, rng);
  }
  SUBCASE("conv 5x5 zero (direct path)") {
    Conv2d<double> l("t", 3, 4, 5, 1, 2, PadMode::kZero, rng);
    check_layer_gradients(l, x, rng);
  }
  SUBCASE("conv transpose") {
    ConvTranspose2d<double> l("t", 3, 4, 3, 2, 1, 1, rng);
    check_layer_gradients(l, x, rng);
  }
  SUBCASE("instance norm") {
    InstanceNorm2d<double> l;
    check_layer_gradients(l, x, rng);
  }
  SUBCASE("relu") {
    ReLU<double> l;
    check_layer_gradients(l, x, rng);
  }
  SUBCASE("leaky relu") {
    LeakyReLU<double> l(0.2);
    check_layer_gradients(l, x, rng);
  }
  SUBCASE("tanh") {
    Tanh<double> l;
    check_layer_gradients(l, x, rng, 1e-5);
  }
  SUBCASE("residual block") {
    Tensor<double> x4 = random_tensor<double>(2, 4, 8, 8, rng);
    ResidualBlock<double> l("t", 4, rng);
    check_layer_gradients(l, x4, rng, 1e-5);
  }
}

TEST_CASE("tensor memory accounting tracks allocations") {
  long long before = memstats::current_bytes();
  {
    Tensor<float> t(1, 1, 64, 64);
    CHECK(memstats::current_bytes() >= before + 16384);
  }
  CHECK(memstats::current_bytes() == before);
}
