#ifndef IMGHOP_LOSSES_HPP
#define IMGHOP_LOSSES_HPP

#include <string>
#include <vector>

#include "imghop/networks.hpp"

namespace imghop {

enum class Direction { kXToY, kYToX };

inline const char* to_string(Direction d) { return d == Direction::kXToY ? "x_to_y" : "y_to_x"; }

struct LossWeights {
  double gamma = 10.0;   // cycle
  double epsilon = 1.0;  // adversarial
  double delta = 1.0;    // hybrid
  double zeta = 2.5;     // smoothness

  void validate() const {
    if (gamma < 0 || epsilon < 0 || delta < 0 || zeta < 0)
      throw ConfigError("LossWeights: weights must be non-negative");
  }
};

// Prescribed hybridness of the n-th hop when training with h total hops:
// n/h on the way to Y, (h-n)/h on the way back to X.
struct HybridnessTarget {
  int hop_index = 1;
  int total_hops = 1;
  Direction direction = Direction::kXToY;

  double value() const {
    if (total_hops < 1 || hop_index < 0 || hop_index > total_hops)
      throw ContractError("HybridnessTarget: need 0 <= n <= h, h >= 1");
    double n = static_cast<double>(hop_index), h = static_cast<double>(total_hops);
    return direction == Direction::kXToY ? n / h : (h - n) / h;
  }
};

struct LossBreakdown {
  double cycle = 0;
  double adversarial = 0;
  double hybrid = 0;
  double smoothness = 0;
  double weighted_total = 0;
  int hop_index = 0;
  Direction direction = Direction::kXToY;
};

inline double weighted_total(const LossWeights& w, double cycle, double adversarial, double hybrid,
                             double smoothness) {
  return w.gamma * cycle + w.epsilon * adversarial + w.delta * hybrid + w.zeta * smoothness;
}

// ---- reduction primitives -------------------------------------------------
// All reductions are per-element means, so values are resolution-independent.

template <typename T>
double l1_mean(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ContractError("l1_mean: shape mismatch");
  double s = 0;
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0, e = a.size(); i < e; ++i)
    s += std::abs(static_cast<double>(pa[i]) - static_cast<double>(pb[i]));
  return s / static_cast<double>(a.size());
}

// ga += scale * d l1_mean(a,b) / da. The subgradient at a == b is 0.
template <typename T>
void l1_mean_backward(const Tensor<T>& a, const Tensor<T>& b, double scale, Tensor<T>& ga) {
  const T* pa = a.data();
  const T* pb = b.data();
  T* g = ga.data();
  T k = static_cast<T>(scale / static_cast<double>(a.size()));
  for (std::size_t i = 0, e = a.size(); i < e; ++i) {
    T d = pa[i] - pb[i];
    g[i] += d > T(0) ? k : (d < T(0) ? -k : T(0));
  }
}

template <typename T>
double mse_to_target(const Tensor<T>& m, double target) {
  double s = 0;
  const T* p = m.data();
  for (std::size_t i = 0, e = m.size(); i < e; ++i) {
    double d = static_cast<double>(p[i]) - target;
    s += d * d;
  }
  return s / static_cast<double>(m.size());
}

// gm += scale * d mse_to_target(m,t) / dm
template <typename T>
void mse_to_target_backward(const Tensor<T>& m, double target, double scale, Tensor<T>& gm) {
  const T* p = m.data();
  T* g = gm.data();
  double k = 2.0 * scale / static_cast<double>(m.size());
  for (std::size_t i = 0, e = m.size(); i < e; ++i)
    g[i] += static_cast<T>(k * (static_cast<double>(p[i]) - target));
}

// Batch mean of (pooled per-image score - target)^2 over a patch map.
template <typename T>
double pooled_score_mse(const Tensor<T>& map, double target) {
  std::vector<double> scores = per_image_means(map);
  double s = 0;
  for (double v : scores) {
    double d = v - target;
    s += d * d;
  }
  return s / static_cast<double>(scores.size());
}

// gmap += scale * d pooled_score_mse / dmap
template <typename T>
void pooled_score_mse_backward(const Tensor<T>& map, double target, double scale,
                               Tensor<T>& gmap) {
  std::vector<double> scores = per_image_means(map);
  const std::size_t P = static_cast<std::size_t>(map.c()) * map.plane_size();
  const double B = static_cast<double>(map.n());
  for (int b = 0; b < map.n(); ++b) {
    double k = scale * 2.0 * (scores[static_cast<std::size_t>(b)] - target) /
               (B * static_cast<double>(P));
    T* g = gmap.data() + b * P;
    for (std::size_t q = 0; q < P; ++q) g[q] += static_cast<T>(k);
  }
}

// ---- loss terms over networks (evaluation forms) ---------------------------

// Mean |back(current) - previous|: the opposite generator should undo one hop.
template <typename T>
double cycle_term(const Generator<T>& gen_back, const Tensor<T>& current,
                  const Tensor<T>& previous) {
  return l1_mean(gen_back.forward(current), previous);
}

// Generator side of the least-squares game: patches of generated images
// are driven toward the real label 1.
template <typename T>
double adversarial_gen_term(const PatchDiscriminator<T>& disc, const Tensor<T>& generated) {
  return mse_to_target(disc.forward(generated), 1.0);
}

// Discriminator side: real patches toward 1, generated patches toward 0.
template <typename T>
double adversarial_disc_term(const PatchDiscriminator<T>& disc, const Tensor<T>& real_images,
                             const Tensor<T>& generated) {
  return mse_to_target(disc.forward(real_images), 1.0) +
         mse_to_target(disc.forward(generated), 0.0);
}

// Squared distance between the pooled hybrid score and the hop's target.
template <typename T>
double hybrid_term(const PatchDiscriminator<T>& disc_h, const Tensor<T>& generated,
                   const HybridnessTarget& target) {
  return pooled_score_mse(disc_h.forward(generated), target.value());
}

template <typename T>
double smoothness_term(const Tensor<T>& current, const Tensor<T>& previous) {
  return l1_mean(current, previous);
}

// D_H's own training loss: real X images toward 0, real Y images toward 1.
template <typename T>
double classifier_term(const PatchDiscriminator<T>& disc_h, const Tensor<T>& real_x,
                       const Tensor<T>& real_y) {
  return pooled_score_mse(disc_h.forward(real_x), 0.0) +
         pooled_score_mse(disc_h.forward(real_y), 1.0);
}

// Complete objective: all four sums over hops n = 1..h in both directions,
// combined with the weights. Used for reporting and tests, not for the
// interleaved per-hop training updates.
template <typename T>
LossBreakdown full_objective(const ModelBundle<T>& bundle, const Tensor<T>& x_batch,
                             const Tensor<T>& y_batch, int h, const LossWeights& w) {
  if (h < 1) throw ConfigError("full_objective: h must be >= 1");
  std::vector<Tensor<T>> gx = hop_sequence(bundle.gen_G, x_batch, h);
  std::vector<Tensor<T>> fy = hop_sequence(bundle.gen_F, y_batch, h);

  LossBreakdown out;
  out.hop_index = h;
  out.adversarial = mse_to_target(bundle.disc_Y.forward(y_batch), 1.0) +
                    mse_to_target(bundle.disc_X.forward(x_batch), 1.0);
  for (int n = 1; n <= h; ++n) {
    const auto& gn = gx[static_cast<std::size_t>(n)];
    const auto& gprev = gx[static_cast<std::size_t>(n) - 1];
    const auto& fn = fy[static_cast<std::size_t>(n)];
    const auto& fprev = fy[static_cast<std::size_t>(n) - 1];
    out.cycle += cycle_term(bundle.gen_F, gn, gprev) + cycle_term(bundle.gen_G, fn, fprev);
    out.adversarial += mse_to_target(bundle.disc_Y.forward(gn), 0.0) +
                       mse_to_target(bundle.disc_X.forward(fn), 0.0);
    out.hybrid += hybrid_term(bundle.disc_H, gn, {n, h, Direction::kXToY}) +
                  hybrid_term(bundle.disc_H, fn, {n, h, Direction::kYToX});
    out.smoothness += smoothness_term(gn, gprev) + smoothness_term(fn, fprev);
  }
  out.weighted_total = weighted_total(w, out.cycle, out.adversarial, out.hybrid, out.smoothness);
  return out;
}

}  // namespace imghop

#endif  // IMGHOP_LOSSES_HPP
