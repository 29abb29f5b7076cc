#ifndef IMGHOP_TESTS_GRADCHECK_HPP
#define IMGHOP_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "imghop/training.hpp"

namespace imghop::gradcheck {

struct Result {
  std::string network;
  int checked = 0;
  int passed = 0;
  int excluded = 0;  // probes straddling a non-differentiable point
  double worst_rel = 0;

  double pass_fraction() const {
    return checked == 0 ? 1.0 : static_cast<double>(passed) / checked;
  }
};

// Compares an analytic gradient store against central finite differences of
// `loss_fn` over `n_coords` coordinates sampled uniformly from the network's
// parameter vector.
//
// The per-hop loss contains L1 terms and ReLU-family activations, which are
// not differentiable everywhere; a central difference that straddles such a
// kink does not estimate the derivative at all. Probes where differences at
// step h and h/2 disagree are therefore excluded and resampled -- the
// standard treatment for finite-difference checks of piecewise-smooth
// functions. Valid probes are still compared at the full step h.
template <typename Net>
Result check_network(Net& net, const GradStore<double>& analytic,
                     const std::function<double()>& loss_fn, int n_coords, double fd_step,
                     double rel_tol, Rng& rng, const std::string& label) {
  std::vector<Param<double>*> params = net.params();
  std::size_t total = 0;
  for (Param<double>* p : params) total += p->value.size();

  Result res;
  res.network = label;
  const int max_attempts = 100 * n_coords;
  int attempts = 0;
  while (res.checked < n_coords && attempts < max_attempts) {
    ++attempts;
    std::size_t flat =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(total) - 1));
    Param<double>* p = nullptr;
    std::size_t idx = 0;
    for (Param<double>* cand : params) {
      if (flat < cand->value.size()) {
        p = cand;
        idx = flat;
        break;
      }
      flat -= cand->value.size();
    }
    double orig = p->value.data()[idx];
    auto eval_at = [&](double delta) {
      p->value.data()[idx] = orig + delta;
      double v = loss_fn();
      p->value.data()[idx] = orig;
      return v;
    };
    double fd = (eval_at(fd_step) - eval_at(-fd_step)) / (2.0 * fd_step);
    double fd_half = (eval_at(fd_step / 2) - eval_at(-fd_step / 2)) / fd_step;
    double an = analytic.grad(p->id).data()[idx];

    double scale = std::max({std::abs(fd), std::abs(fd_half), 1e-8});
    if (std::abs(fd - fd_half) > 1e-4 * scale) {
      ++res.excluded;
      continue;
    }
    ++res.checked;
    // Both routes vanishing (e.g. a conv bias normalized away downstream).
    if (std::abs(an) < 1e-10 && std::abs(fd) < 1e-10) {
      ++res.passed;
      continue;
    }
    double rel = std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
    res.worst_rel = std::max(res.worst_rel, rel);
    if (rel < rel_tol) ++res.passed;
  }
  return res;
}

// Per-network gradient checks of the full per-hop losses on a 64-bit tiny
// profile: the generator-update loss for G and (through the cycle term) F,
// and the discriminator/classifier losses for D_X, D_Y, D_H.
inline std::vector<Result> run_per_hop_gradcheck(int n_coords, double fd_step, double rel_tol,
                                                 int input_size = 8, int batch = 2,
                                                 std::uint64_t seed = 7) {
  GeneratorSpec gspec{16, 2, input_size};
  DiscriminatorSpec dspec{16, 2};
  Rng init(seed);
  ModelBundle<double> bundle(gspec, dspec, 4, init);
  Rng data_rng(seed + 1);
  auto rand_batch = [&](int n) {
    Tensor<double> t(n, 3, input_size, input_size);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = data_rng.uniform(-0.9, 0.9);
    return t;
  };
  Tensor<double> x = rand_batch(batch);
  Tensor<double> y = rand_batch(batch);
  LossWeights w;
  const int hop = 1, h = 4;

  std::vector<Result> results;
  Rng coord_rng(seed + 2);

  // Generator-update loss for G (direction X -> Y); also exercises F via the
  // cycle composition.
  {
    GradStore<double> gg, gf;
    gg.init_like(bundle.gen_G.params());
    gf.init_like(bundle.gen_F.params());
    generator_hop_loss(bundle.gen_G, bundle.gen_F, bundle.disc_Y, bundle.disc_H, x, hop, h,
                       Direction::kXToY, w, &gg, &gf);
    auto loss = [&] {
      return generator_hop_loss<double>(bundle.gen_G, bundle.gen_F, bundle.disc_Y,
                                        bundle.disc_H, x, hop, h, Direction::kXToY, w,
                                        nullptr, nullptr)
          .weighted_total;
    };
    results.push_back(
        check_network(bundle.gen_G, gg, loss, n_coords, fd_step, rel_tol, coord_rng, "gen_G"));
    results.push_back(
        check_network(bundle.gen_F, gf, loss, n_coords, fd_step, rel_tol, coord_rng, "gen_F"));
  }

  // Discriminator losses.
  {
    Tensor<double> fake_y = bundle.gen_G.forward(x);
    GradStore<double> g;
    g.init_like(bundle.disc_Y.params());
    discriminator_loss(bundle.disc_Y, y, fake_y, w.epsilon, &g);
    auto loss = [&] {
      return w.epsilon * discriminator_loss<double>(bundle.disc_Y, y, fake_y, w.epsilon, nullptr);
    };
    results.push_back(
        check_network(bundle.disc_Y, g, loss, n_coords, fd_step, rel_tol, coord_rng, "disc_Y"));
  }
  {
    Tensor<double> fake_x = bundle.gen_F.forward(y);
    GradStore<double> g;
    g.init_like(bundle.disc_X.params());
    discriminator_loss(bundle.disc_X, x, fake_x, w.epsilon, &g);
    auto loss = [&] {
      return w.epsilon * discriminator_loss<double>(bundle.disc_X, x, fake_x, w.epsilon, nullptr);
    };
    results.push_back(
        check_network(bundle.disc_X, g, loss, n_coords, fd_step, rel_tol, coord_rng, "disc_X"));
  }
  {
    GradStore<double> g;
    g.init_like(bundle.disc_H.params());
    classifier_loss(bundle.disc_H, x, y, w.delta, &g);
    auto loss = [&] { return w.delta * classifier_loss<double>(bundle.disc_H, x, y, w.delta, nullptr); };
    results.push_back(
        check_network(bundle.disc_H, g, loss, n_coords, fd_step, rel_tol, coord_rng, "disc_H"));
  }
  return results;
}

}  // namespace imghop::gradcheck

#endif  // IMGHOP_TESTS_GRADCHECK_HPP
