#include <doctest.h>

#include "../common/gradcheck.hpp"

using namespace imghop;

TEST_CASE("per-hop loss gradients match finite differences on every network") {
  auto results = gradcheck::run_per_hop_gradcheck(/*n_coords=*/40, /*fd_step=*/1e-4,
                                                  /*rel_tol=*/1e-3);
  REQUIRE(results.size() == 5);
  for (const auto& r : results) {
    CAPTURE(r.network);
    CAPTURE(r.worst_rel);
    CHECK(r.checked == 40);
    CHECK(r.pass_fraction() >= 0.99);
  }
}

TEST_CASE("cycle gradients reach the opposite generator only through gamma") {
  GeneratorSpec gspec{16, 2, 8};
  DiscriminatorSpec dspec{16, 2};
  Rng init(11);
  ModelBundle<double> bundle(gspec, dspec, 4, init);
  Rng data_rng(12);
  Tensor<double> x(2, 3, 8, 8);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = data_rng.uniform(-0.9, 0.9);

  LossWeights w;
  w.gamma = 0.0;  // cycle off: nothing may reach the opposite generator
  GradStore<double> gg, gf;
  gg.init_like(bundle.gen_G.params());
  gf.init_like(bundle.gen_F.params());
  generator_hop_loss(bundle.gen_G, bundle.gen_F, bundle.disc_Y, bundle.disc_H, x, 1, 4,
                     Direction::kXToY, w, &gg, &gf);
  double fsum = 0;
  for (std::size_t i = 0; i < gf.size(); ++i)
    for (std::size_t j = 0; j < gf.grad(static_cast<int>(i)).size(); ++j)
      fsum += std::abs(gf.grad(static_cast<int>(i)).data()[j]);
  CHECK(fsum == 0.0);

  double gsum = 0;
  for (std::size_t i = 0; i < gg.size(); ++i)
    for (std::size_t j = 0; j < gg.grad(static_cast<int>(i)).size(); ++j)
      gsum += std::abs(gg.grad(static_cast<int>(i)).data()[j]);
  CHECK(gsum > 0.0);
}
