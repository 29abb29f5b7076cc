#ifndef IMGHOP_TRAINING_HPP
#define IMGHOP_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "imghop/adam.hpp"
#include "imghop/dataset.hpp"
#include "imghop/losses.hpp"
#include "imghop/networks.hpp"

namespace imghop {

struct TrainingConfig {
  int h = 4;
  LossWeights weights;
  double learning_rate = 0.0002;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 6;
  int epochs = 100;
  int steps_per_epoch = 0;  // 0: derived as ceil(min(|X|,|Y|) / batch_size)
  std::uint64_t seed = 1;
  int checkpoint_interval = 500;

  void validate() const {
    if (h < 1) throw ConfigError("TrainingConfig: h must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("TrainingConfig: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("TrainingConfig: batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("TrainingConfig: epochs must be >= 0");
    if (steps_per_epoch < 0) throw ConfigError("TrainingConfig: steps_per_epoch must be >= 0");
    if (checkpoint_interval < 1)
      throw ConfigError("TrainingConfig: checkpoint_interval must be >= 1");
    weights.validate();
  }
};

enum class UpdateKind { kGenG, kGenF, kDiscX, kDiscY, kDiscH };

inline const char* to_string(UpdateKind k) {
  switch (k) {
    case UpdateKind::kGenG: return "gen_G";
    case UpdateKind::kGenF: return "gen_F";
    case UpdateKind::kDiscX: return "disc_X";
    case UpdateKind::kDiscY: return "disc_Y";
    case UpdateKind::kDiscH: return "disc_H";
  }
  return "?";
}

struct SubUpdateRecord {
  std::int64_t step = 0;
  int hop = 0;
  UpdateKind kind = UpdateKind::kGenG;
  LossBreakdown losses;
};

// Adam state for all five networks of a bundle.
template <typename T>
struct BundleOptimizers {
  AdamState<T> g, f, dx, dy, dh;

  explicit BundleOptimizers(ModelBundle<T>& bundle)
      : g(bundle.gen_G.params()),
        f(bundle.gen_F.params()),
        dx(bundle.disc_X.params()),
        dy(bundle.disc_Y.params()),
        dh(bundle.disc_H.params()) {}
};

// Hop-n loss terms for one generator update, with gradients.
//
// fwd_gen produces the hop; back_gen supplies the cycle composition.
// The hop input is detached: no gradient flows into anything that produced
// it. Gradients of all four terms reach fwd_gen (g_fwd); the cycle term is
// the only one that reaches back_gen (g_back). The discriminators are read
// but receive no parameter gradients here.
//
// A precomputed forward pass (output + trace) may be supplied when the hop
// image was already produced with the generator's current parameters.
template <typename T>
LossBreakdown generator_hop_loss(const Generator<T>& fwd_gen, const Generator<T>& back_gen,
                                 const PatchDiscriminator<T>& adv_disc,
                                 const PatchDiscriminator<T>& hyb_disc, const Tensor<T>& hop_input,
                                 int hop_index, int total_hops, Direction dir,
                                 const LossWeights& w, GradStore<T>* g_fwd, GradStore<T>* g_back,
                                 const Tensor<T>* precomputed_output = nullptr,
                                 const typename Generator<T>::Trace* precomputed_trace = nullptr) {
  const bool want_grads = g_fwd != nullptr || g_back != nullptr;
  typename Generator<T>::Trace own_trace;
  const typename Generator<T>::Trace* fwd_trace = nullptr;
  Tensor<T> hop_output;
  const Tensor<T>* out_ptr = nullptr;
  if (precomputed_output != nullptr) {
    out_ptr = precomputed_output;
    fwd_trace = precomputed_trace;
  } else {
    hop_output = fwd_gen.forward(hop_input, g_fwd ? &own_trace : nullptr);
    out_ptr = &hop_output;
    fwd_trace = &own_trace;
  }
  const Tensor<T>& xg = *out_ptr;

  typename PatchDiscriminator<T>::Trace adv_trace, hyb_trace;
  typename Generator<T>::Trace back_trace;
  Tensor<T> adv_map = adv_disc.forward(xg, g_fwd ? &adv_trace : nullptr);
  Tensor<T> cyc_out = back_gen.forward(xg, want_grads ? &back_trace : nullptr);
  Tensor<T> hyb_map = hyb_disc.forward(xg, g_fwd ? &hyb_trace : nullptr);

  HybridnessTarget target{hop_index, total_hops, dir};
  LossBreakdown out;
  out.hop_index = hop_index;
  out.direction = dir;
  out.adversarial = mse_to_target(adv_map, 1.0);
  out.cycle = l1_mean(cyc_out, hop_input);
  out.hybrid = pooled_score_mse(hyb_map, target.value());
  out.smoothness = l1_mean(xg, hop_input);
  out.weighted_total = weighted_total(w, out.cycle, out.adversarial, out.hybrid, out.smoothness);

  if (want_grads) {
    Tensor<T> gcyc = Tensor<T>::zeros_like(cyc_out);
    l1_mean_backward(cyc_out, hop_input, w.gamma, gcyc);
    Tensor<T> gx_cycle = back_gen.backward(gcyc, back_trace, g_back, g_fwd != nullptr);
    if (g_fwd) {
      if (fwd_trace == nullptr || fwd_trace->empty())
        throw ContractError("generator_hop_loss: precomputed output requires its trace");
      Tensor<T> gxg = std::move(gx_cycle);
      Tensor<T> gadv = Tensor<T>::zeros_like(adv_map);
      mse_to_target_backward(adv_map, 1.0, w.epsilon, gadv);
      axpy(T(1), adv_disc.backward(gadv, adv_trace, nullptr, true), gxg);
      Tensor<T> ghyb = Tensor<T>::zeros_like(hyb_map);
      pooled_score_mse_backward(hyb_map, target.value(), w.delta, ghyb);
      axpy(T(1), hyb_disc.backward(ghyb, hyb_trace, nullptr, true), gxg);
      l1_mean_backward(xg, hop_input, w.zeta, gxg);
      fwd_gen.backward(gxg, *fwd_trace, g_fwd, false);
    }
  }
  return out;
}

// Least-squares discriminator loss with gradients for the discriminator
// only; the generated batch is treated as constant.
template <typename T>
double discriminator_loss(const PatchDiscriminator<T>& disc, const Tensor<T>& real_images,
                          const Tensor<T>& generated, double grad_weight, GradStore<T>* grads) {
  typename PatchDiscriminator<T>::Trace tr, tf;
  Tensor<T> pr = disc.forward(real_images, grads ? &tr : nullptr);
  Tensor<T> pf = disc.forward(generated, grads ? &tf : nullptr);
  double loss = mse_to_target(pr, 1.0) + mse_to_target(pf, 0.0);
  if (grads) {
    Tensor<T> gr = Tensor<T>::zeros_like(pr);
    mse_to_target_backward(pr, 1.0, grad_weight, gr);
    disc.backward(gr, tr, grads, false);
    Tensor<T> gf = Tensor<T>::zeros_like(pf);
    mse_to_target_backward(pf, 0.0, grad_weight, gf);
    disc.backward(gf, tf, grads, false);
  }
  return loss;
}

// D_H classifier loss on real images only, with gradients for D_H.
template <typename T>
double classifier_loss(const PatchDiscriminator<T>& disc_h, const Tensor<T>& real_x,
                       const Tensor<T>& real_y, double grad_weight, GradStore<T>* grads) {
  typename PatchDiscriminator<T>::Trace tx, ty;
  Tensor<T> px = disc_h.forward(real_x, grads ? &tx : nullptr);
  Tensor<T> py = disc_h.forward(real_y, grads ? &ty : nullptr);
  double loss = pooled_score_mse(px, 0.0) + pooled_score_mse(py, 1.0);
  if (grads) {
    Tensor<T> gx = Tensor<T>::zeros_like(px);
    pooled_score_mse_backward(px, 0.0, grad_weight, gx);
    disc_h.backward(gx, tx, grads, false);
    Tensor<T> gy = Tensor<T>::zeros_like(py);
    pooled_score_mse_backward(py, 1.0, grad_weight, gy);
    disc_h.backward(gy, ty, grads, false);
  }
  return loss;
}

namespace detail {

inline void check_finite_breakdown(const LossBreakdown& b, std::int64_t step) {
  const char* term = nullptr;
  if (!std::isfinite(b.cycle)) term = "cycle";
  else if (!std::isfinite(b.adversarial)) term = "adversarial";
  else if (!std::isfinite(b.hybrid)) term = "hybrid";
  else if (!std::isfinite(b.smoothness)) term = "smoothness";
  if (term) {
    throw TrainingAbortError(std::string("non-finite ") + term + " loss at step " +
                             std::to_string(step) + ", hop " + std::to_string(b.hop_index) +
                             ", direction " + to_string(b.direction));
  }
}

inline void check_finite_value(double v, const char* term, std::int64_t step, int hop,
                               Direction dir) {
  if (!std::isfinite(v)) {
    throw TrainingAbortError(std::string("non-finite ") + term + " loss at step " +
                             std::to_string(step) + ", hop " + std::to_string(hop) +
                             ", direction " + to_string(dir));
  }
}

}  // namespace detail

// One step of the interleaved per-hop update schedule.
//
// For each hop n = 1..h: hop both running images with the current
// parameters (the hop inputs are detached), then update G, F, D_X, D_Y and
// D_H in that order. Each sub-update sees the parameters refreshed by the
// previous ones; the images carried to hop n+1 are the ones produced before
// any of hop n's updates (no recompute).
template <typename T>
std::vector<SubUpdateRecord> train_step_impl(ModelBundle<T>& bundle, BundleOptimizers<T>& opt,
                                             const TrainingConfig& cfg, const Tensor<T>& x_batch,
                                             const Tensor<T>& y_batch, std::int64_t global_step) {
  const LossWeights& w = cfg.weights;
  const double lr = cfg.learning_rate, b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  std::vector<SubUpdateRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.h) * 6);

  Tensor<T> x_prev = x_batch;
  Tensor<T> y_prev = y_batch;
  for (int n = 1; n <= cfg.h; ++n) {
    // (1) hop with pre-update parameters; these are the images carried on.
    typename Generator<T>::Trace g_trace;
    Tensor<T> x_cur = bundle.gen_G.forward(x_prev, &g_trace);
    Tensor<T> y_cur = bundle.gen_F.forward(y_prev);

    // (2) generator update for G; the cycle term also reaches F.
    {
      GradStore<T> gg, gf;
      gg.init_like(bundle.gen_G.params());
      gf.init_like(bundle.gen_F.params());
      LossBreakdown b =
          generator_hop_loss(bundle.gen_G, bundle.gen_F, bundle.disc_Y, bundle.disc_H, x_prev, n,
                             cfg.h, Direction::kXToY, w, &gg, &gf, &x_cur, &g_trace);
      detail::check_finite_breakdown(b, global_step);
      opt.g.step(bundle.gen_G.params(), gg, lr, b1, b2);
      opt.f.step(bundle.gen_F.params(), gf, lr, b1, b2);
      records.push_back({global_step, n, UpdateKind::kGenG, b});
    }

    // (3) generator update for F with refreshed parameters; cycle reaches G.
    {
      GradStore<T> gf, gg;
      gf.init_like(bundle.gen_F.params());
      gg.init_like(bundle.gen_G.params());
      LossBreakdown b = generator_hop_loss(bundle.gen_F, bundle.gen_G, bundle.disc_X,
                                           bundle.disc_H, y_prev, n, cfg.h, Direction::kYToX, w,
                                           &gf, &gg);
      detail::check_finite_breakdown(b, global_step);
      opt.f.step(bundle.gen_F.params(), gf, lr, b1, b2);
      opt.g.step(bundle.gen_G.params(), gg, lr, b1, b2);
      records.push_back({global_step, n, UpdateKind::kGenF, b});
    }

    // (4) discriminator update for D_X: real x vs generated y_cur.
    {
      GradStore<T> g;
      g.init_like(bundle.disc_X.params());
      double v = discriminator_loss(bundle.disc_X, x_batch, y_cur, w.epsilon, &g);
      detail::check_finite_value(v, "adversarial", global_step, n, Direction::kYToX);
      opt.dx.step(bundle.disc_X.params(), g, lr, b1, b2);
      LossBreakdown b;
      b.adversarial = v;
      b.weighted_total = w.epsilon * v;
      b.hop_index = n;
      b.direction = Direction::kYToX;
      records.push_back({global_step, n, UpdateKind::kDiscX, b});
    }

    // (5) discriminator update for D_Y: real y vs generated x_cur.
    {
      GradStore<T> g;
      g.init_like(bundle.disc_Y.params());
      double v = discriminator_loss(bundle.disc_Y, y_batch, x_cur, w.epsilon, &g);
      detail::check_finite_value(v, "adversarial", global_step, n, Direction::kXToY);
      opt.dy.step(bundle.disc_Y.params(), g, lr, b1, b2);
      LossBreakdown b;
      b.adversarial = v;
      b.weighted_total = w.epsilon * v;
      b.hop_index = n;
      b.direction = Direction::kXToY;
      records.push_back({global_step, n, UpdateKind::kDiscY, b});
    }

    // (6) classifier update for D_H on real images only.
    {
      GradStore<T> g;
      g.init_like(bundle.disc_H.params());
      double v = classifier_loss(bundle.disc_H, x_batch, y_batch, w.delta, &g);
      detail::check_finite_value(v, "hybrid", global_step, n, Direction::kXToY);
      opt.dh.step(bundle.disc_H.params(), g, lr, b1, b2);
      LossBreakdown b;
      b.hybrid = v;
      b.weighted_total = w.delta * v;
      b.hop_index = n;
      records.push_back({global_step, n, UpdateKind::kDiscH, b});
    }

    x_prev = std::move(x_cur);
    y_prev = std::move(y_cur);
  }
  return records;
}

// Full training state: networks, optimizer moments, counters and the
// sampling generator. Serializing and restoring this reproduces the rest
// of a run bit-for-bit on the same hardware and numeric mode.
struct TrainingState {
  ModelBundle<float> bundle;
  BundleOptimizers<float> optimizers;
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  Rng rng;
  TrainingConfig config;

  TrainingState(const TrainingConfig& cfg, const GeneratorSpec& gspec,
                const DiscriminatorSpec& dspec)
      : bundle(make_bundle(cfg, gspec, dspec)),
        optimizers(bundle),
        rng(cfg.seed),
        config(cfg) {}

 private:
  static ModelBundle<float> make_bundle(const TrainingConfig& cfg, const GeneratorSpec& gspec,
                                        const DiscriminatorSpec& dspec) {
    cfg.validate();
    Rng init_rng(cfg.seed);
    return ModelBundle<float>(gspec, dspec, cfg.h, init_rng);
  }
};

std::vector<SubUpdateRecord> train_step(TrainingState& state, const Batch& x_batch,
                                        const Batch& y_batch);

// Runs epochs x steps_per_epoch training steps, appending one structured
// log record per sub-update to <out_dir>/train_log.jsonl and writing
// checkpoints every config.checkpoint_interval steps and at completion.
// Returns the final checkpoint path. With a resume checkpoint, continues
// from its counters after verifying the config hash.
std::string train(const TrainingConfig& config, const GeneratorSpec& gspec,
                  const DiscriminatorSpec& dspec, const UnpairedDataset& dataset_x,
                  const UnpairedDataset& dataset_y, const std::string& out_dir,
                  const std::string& resume_checkpoint = "");

int resolved_steps_per_epoch(const TrainingConfig& config, std::size_t x_items,
                             std::size_t y_items);

std::string training_config_hash(const TrainingConfig& config, const GeneratorSpec& gspec,
                                 const DiscriminatorSpec& dspec);

}  // namespace imghop

#endif  // IMGHOP_TRAINING_HPP
