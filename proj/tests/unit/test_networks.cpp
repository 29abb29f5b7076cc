#include <doctest.h>

#include <cstring>

#include "imghop/networks.hpp"
#include "test_helpers.hpp"

using namespace imghop;
using test::random_tensor;

namespace {
GeneratorSpec tiny_gen() { return {16, 2, 32}; }
DiscriminatorSpec tiny_disc() { return {16, 3}; }
}  // namespace

TEST_CASE("generator preserves shape and range") {
  Rng rng(1);
  Generator<float> gen(tiny_gen(), rng);
  Tensor<float> x = random_tensor<float>(2, 3, 32, 32, rng);
  Tensor<float> y = gen.forward(x);
  REQUIRE(y.same_shape(x));
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(y.data()[i] > -1.f);
    CHECK(y.data()[i] < 1.f);
  }
}

TEST_CASE("generator forward is deterministic") {
  Rng rng(2);
  Generator<float> gen(tiny_gen(), rng);
  Tensor<float> x = random_tensor<float>(1, 3, 32, 32, rng);
  CHECK(bitwise_equal(gen.forward(x), gen.forward(x)));
}

TEST_CASE("generator rejects wrong input size") {
  Rng rng(3);
  Generator<float> gen(tiny_gen(), rng);
  Tensor<float> x(1, 3, 16, 16);
  CHECK_THROWS_AS(gen.forward(x), ContractError);
}

TEST_CASE("parameter count depends on spec only") {
  Rng a(1), b(99);
  Generator<float> g1(tiny_gen(), a);
  Generator<float> g2(tiny_gen(), b);
  REQUIRE(g1.params().size() == g2.params().size());
  CHECK(g1.parameter_count() == g2.parameter_count());
  for (std::size_t i = 0; i < g1.params().size(); ++i) {
    CHECK(g1.params()[i]->value.same_shape(g2.params()[i]->value));
    CHECK(g1.params()[i]->name == g2.params()[i]->name);
  }
  // different seeds give different values
  CHECK(!bitwise_equal(g1.params()[0]->value, g2.params()[0]->value));
}

TEST_CASE("residual trunk width is 4x base") {
  Rng rng(4);
  Generator<float> gen({64, 12, 128}, rng);
  const Param<float>* res_conv = nullptr;
  for (const Param<float>* p : gen.params())
    if (p->name == "res1.conv1.weight") res_conv = p;
  REQUIRE(res_conv != nullptr);
  CHECK(res_conv->value.n() == 256);
  CHECK(res_conv->value.c() == 256);

  Rng rng2(4);
  Generator<float> tiny(tiny_gen(), rng2);
  for (const Param<float>* p : tiny.params())
    if (p->name == "res1.conv1.weight") {
      CHECK(p->value.n() == 64);
      CHECK(p->value.c() == 64);
    }
}

TEST_CASE("patch map shape law") {
  Rng rng(5);
  SUBCASE("4-layer spec: 128 -> 16") {
    PatchDiscriminator<float> disc({64, 4}, rng);
    Tensor<float> x = random_tensor<float>(1, 3, 128, 128, rng);
    Tensor<float> m = disc.forward(x);
    CHECK(m.c() == 1);
    CHECK(m.h() == 16);
    CHECK(m.w() == 16);
  }
  SUBCASE("tiny spec: base 8, 3 layers, 32 -> 4") {
    PatchDiscriminator<float> disc({8, 3}, rng);
    Tensor<float> x = random_tensor<float>(2, 3, 32, 32, rng);
    Tensor<float> m = disc.forward(x);
    CHECK(m.h() == 4);
    CHECK(m.w() == 4);
  }
}

TEST_CASE("discriminator handles constant input without NaN") {
  Rng rng(6);
  PatchDiscriminator<float> disc(tiny_disc(), rng);
  Tensor<float> x(1, 3, 32, 32);  // all zeros
  Tensor<float> m = disc.forward(x);
  CHECK(all_finite(m));
}

TEST_CASE("discriminator output invariant to batch companions") {
  Rng rng(7);
  PatchDiscriminator<float> disc(tiny_disc(), rng);
  Tensor<float> batch = random_tensor<float>(4, 3, 32, 32, rng);
  Tensor<float> single(1, 3, 32, 32);
  for (int c = 0; c < 3; ++c)
    std::memcpy(single.plane(0, c), batch.plane(2, c), single.plane_size() * sizeof(float));
  Tensor<float> mb = disc.forward(batch);
  Tensor<float> ms = disc.forward(single);
  double worst = 0;
  for (std::size_t q = 0; q < ms.plane_size(); ++q)
    worst = std::max(worst, std::abs(static_cast<double>(mb.plane(2, 0)[q]) -
                                     static_cast<double>(ms.plane(0, 0)[q])));
  CHECK(worst <= 1e-5);
}

TEST_CASE("hybrid score pools patch means") {
  Tensor<float> m(1, 1, 4, 4);
  m.fill(0.25f);
  CHECK(patch_mean(m) == doctest::Approx(0.25).epsilon(1e-12));
  for (int q = 0; q < 8; ++q) m.data()[q] = 0.f;
  for (int q = 8; q < 16; ++q) m.data()[q] = 1.f;
  CHECK(patch_mean(m) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hop sequence recurrence") {
  Rng rng(8);
  Generator<float> gen(tiny_gen(), rng);
  Tensor<float> x = random_tensor<float>(1, 3, 32, 32, rng);

  SUBCASE("n=0 returns the input exactly") {
    auto seq = hop_sequence(gen, x, 0);
    REQUIRE(seq.size() == 1);
    CHECK(bitwise_equal(seq[0], x));
  }
  SUBCASE("element k equals hop applied to element k-1, exactly") {
    auto seq = hop_sequence(gen, x, 8);
    REQUIRE(seq.size() == 9);
    for (int k = 1; k <= 8; ++k)
      CHECK(bitwise_equal(seq[static_cast<std::size_t>(k)],
                          hop(gen, seq[static_cast<std::size_t>(k) - 1])));
  }
  SUBCASE("negative hop count is a contract violation") {
    CHECK_THROWS_AS(hop_sequence(gen, x, -1), ContractError);
  }
}

TEST_CASE("model bundle: generators share parameter counts, independent of h") {
  Rng r1(9), r2(9);
  ModelBundle<float> b2(tiny_gen(), tiny_disc(), 2, r1);
  ModelBundle<float> b8(tiny_gen(), tiny_disc(), 8, r2);
  CHECK(b2.gen_G.parameter_count() == b2.gen_F.parameter_count());
  REQUIRE(b2.gen_G.params().size() == b8.gen_G.params().size());
  for (std::size_t i = 0; i < b2.gen_G.params().size(); ++i)
    CHECK(b2.gen_G.params()[i]->value.same_shape(b8.gen_G.params()[i]->value));
}

TEST_CASE("invalid specs are configuration errors") {
  CHECK_THROWS_AS((GeneratorSpec{0, 2, 32}).validate(), ConfigError);
  CHECK_THROWS_AS((GeneratorSpec{16, 0, 32}).validate(), ConfigError);
  CHECK_THROWS_AS((GeneratorSpec{16, 2, 30}).validate(), ConfigError);
  CHECK_THROWS_AS((DiscriminatorSpec{0, 3}).validate(), ConfigError);
  CHECK_THROWS_AS((DiscriminatorSpec{8, 0}).validate(), ConfigError);
}
