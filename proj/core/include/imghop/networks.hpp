#ifndef IMGHOP_NETWORKS_HPP
#define IMGHOP_NETWORKS_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "imghop/layers.hpp"

namespace imghop {

struct GeneratorSpec {
  int base_width = 64;
  int n_residual_blocks = 12;
  int input_size = 128;

  void validate() const {
    if (base_width < 1) throw ConfigError("GeneratorSpec: base_width must be >= 1");
    if (n_residual_blocks < 1) throw ConfigError("GeneratorSpec: n_residual_blocks must be >= 1");
    if (input_size < 4 || input_size % 4 != 0)
      throw ConfigError("GeneratorSpec: input_size must be a positive multiple of 4");
  }

  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  int base_width = 64;
  int n_layers = 4;

  void validate() const {
    if (base_width < 1) throw ConfigError("DiscriminatorSpec: base_width must be >= 1");
    if (n_layers < 1) throw ConfigError("DiscriminatorSpec: n_layers must be >= 1");
  }

  // Spatial downsampling factor: the first three blocks are stride 2,
  // later blocks and the patch projection preserve size.
  int downsample_factor() const { return 1 << (n_layers < 3 ? n_layers : 3); }

  bool operator==(const DiscriminatorSpec&) const = default;
};

namespace detail {

template <typename T>
class LayerStack {
 public:
  using Trace = std::vector<std::unique_ptr<typename Layer<T>::Cache>>;

  Tensor<T> forward(const Tensor<T>& x, Trace* trace) const {
    if (trace) {
      trace->clear();
      trace->resize(layers_.size());
    }
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      cur = layers_[i]->forward(cur, trace ? &(*trace)[i] : nullptr);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Trace& trace, GradStore<T>* grads,
                     bool need_input_grad) const {
    if (trace.size() != layers_.size())
      throw ContractError("backward: trace does not match network");
    Tensor<T> g = gy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      bool need = need_input_grad || i > 0;
      g = layers_[i]->backward(g, *trace[i], grads, need);
    }
    return g;
  }

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  void enumerate_params(std::vector<Param<T>*>& out) {
    for (auto& l : layers_) l->collect_params(out);
    for (std::size_t i = 0; i < out.size(); ++i) out[i]->id = static_cast<int>(i);
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace detail

// Encoder / residual trunk / decoder image-to-image generator:
// 7x7 stem, two stride-2 downsamples, n residual blocks at 4x width,
// two stride-1/2 upsamples, 7x7 head with tanh output.
template <typename T>
class Generator {
 public:
  using Trace = typename detail::LayerStack<T>::Trace;

  Generator(const GeneratorSpec& spec, Rng& rng) : spec_(spec) {
    spec.validate();
    const int b = spec.base_width;
    stack_.add(std::make_unique<Conv2d<T>>("stem.conv", 3, b, 7, 1, 3, PadMode::kReflect, rng));
    stack_.add(std::make_unique<InstanceNorm2d<T>>());
    stack_.add(std::make_unique<ReLU<T>>());
    stack_.add(std::make_unique<Conv2d<T>>("down1.conv", b, 2 * b, 3, 2, 1, PadMode::kZero, rng));
    stack_.add(std::make_unique<InstanceNorm2d<T>>());
    stack_.add(std::make_unique<ReLU<T>>());
    stack_.add(
        std::make_unique<Conv2d<T>>("down2.conv", 2 * b, 4 * b, 3, 2, 1, PadMode::kZero, rng));
    stack_.add(std::make_unique<InstanceNorm2d<T>>());
    stack_.add(std::make_unique<ReLU<T>>());
    for (int i = 0; i < spec.n_residual_blocks; ++i)
      stack_.add(std::make_unique<ResidualBlock<T>>("res" + std::to_string(i + 1), 4 * b, rng));
    stack_.add(std::make_unique<ConvTranspose2d<T>>("up1.conv", 4 * b, 2 * b, 3, 2, 1, 1, rng));
    stack_.add(std::make_unique<InstanceNorm2d<T>>());
    stack_.add(std::make_unique<ReLU<T>>());
    stack_.add(std::make_unique<ConvTranspose2d<T>>("up2.conv", 2 * b, b, 3, 2, 1, 1, rng));
    stack_.add(std::make_unique<InstanceNorm2d<T>>());
    stack_.add(std::make_unique<ReLU<T>>());
    stack_.add(std::make_unique<Conv2d<T>>("head.conv", b, 3, 7, 1, 3, PadMode::kReflect, rng));
    stack_.add(std::make_unique<Tanh<T>>());
    stack_.enumerate_params(params_);
  }

  Tensor<T> forward(const Tensor<T>& x, Trace* trace = nullptr) const {
    if (x.c() != 3 || x.h() != spec_.input_size || x.w() != spec_.input_size)
      throw ContractError("Generator: input must be " + std::to_string(spec_.input_size) + "x" +
                          std::to_string(spec_.input_size) + "x3");
    return stack_.forward(x, trace);
  }

  Tensor<T> backward(const Tensor<T>& gy, const Trace& trace, GradStore<T>* grads,
                     bool need_input_grad) const {
    return stack_.backward(gy, trace, grads, need_input_grad);
  }

  const std::vector<Param<T>*>& params() const { return params_; }
  std::vector<Param<T>*>& params() { return params_; }
  const GeneratorSpec& spec() const { return spec_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Param<T>* p : params_) n += p->value.size();
    return n;
  }

 private:
  GeneratorSpec spec_;
  detail::LayerStack<T> stack_;
  std::vector<Param<T>*> params_;
};

// PatchGAN discriminator: 4x4 conv-norm-LeakyReLU blocks with doubling
// widths (stride 2 for the first three, stride 1 after), then a 4x4
// stride-1 projection to a one-channel patch map with a linear head.
// Stride-1 4x4 convs use asymmetric (1,2) zero padding so the map size is
// exactly input/8 for the 4-layer configuration; the resulting receptive
// field of the 4-layer stack is 70x70.
template <typename T>
class PatchDiscriminator {
 public:
  using Trace = typename detail::LayerStack<T>::Trace;

  PatchDiscriminator(const DiscriminatorSpec& spec, Rng& rng) : spec_(spec) {
    spec.validate();
    int in_ch = 3;
    for (int i = 0; i < spec.n_layers; ++i) {
      int out_ch = spec.base_width << i;
      int stride = i < 3 ? 2 : 1;
      std::string name = "block" + std::to_string(i + 1) + ".conv";
      if (stride == 2) {
        stack_.add(std::make_unique<Conv2d<T>>(name, in_ch, out_ch, 4, 2, 1, PadMode::kZero, rng));
      } else {
        stack_.add(std::make_unique<Conv2d<T>>(name, in_ch, out_ch, 4, 1, 1, 1, 2, 2,
                                               PadMode::kZero, rng));
      }
      stack_.add(std::make_unique<InstanceNorm2d<T>>());
      stack_.add(std::make_unique<LeakyReLU<T>>(0.2));
      in_ch = out_ch;
    }
    stack_.add(
        std::make_unique<Conv2d<T>>("proj.conv", in_ch, 1, 4, 1, 1, 1, 2, 2, PadMode::kZero, rng));
    stack_.enumerate_params(params_);
  }

  // Returns the (B, 1, h/f, w/f) patch map, f = spec.downsample_factor().
  Tensor<T> forward(const Tensor<T>& x, Trace* trace = nullptr) const {
    if (x.c() != 3) throw ContractError("PatchDiscriminator: expects 3-channel input");
    int f = spec_.downsample_factor();
    if (x.h() % f != 0 || x.w() % f != 0)
      throw ContractError("PatchDiscriminator: input dims must be divisible by " +
                          std::to_string(f));
    return stack_.forward(x, trace);
  }

  Tensor<T> backward(const Tensor<T>& gy, const Trace& trace, GradStore<T>* grads,
                     bool need_input_grad) const {
    return stack_.backward(gy, trace, grads, need_input_grad);
  }

  const std::vector<Param<T>*>& params() const { return params_; }
  std::vector<Param<T>*>& params() { return params_; }
  const DiscriminatorSpec& spec() const { return spec_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Param<T>* p : params_) n += p->value.size();
    return n;
  }

 private:
  DiscriminatorSpec spec_;
  detail::LayerStack<T> stack_;
  std::vector<Param<T>*> params_;
};

// Mean of a patch map (or of any tensor).
template <typename T>
double patch_mean(const Tensor<T>& map) {
  double s = 0;
  const T* p = map.data();
  for (std::size_t i = 0, e = map.size(); i < e; ++i) s += static_cast<double>(p[i]);
  return s / static_cast<double>(map.size());
}

// Per-image pooled scores of a (B,1,h,w) patch map.
template <typename T>
std::vector<double> per_image_means(const Tensor<T>& map) {
  std::vector<double> out(static_cast<std::size_t>(map.n()));
  const std::size_t P = static_cast<std::size_t>(map.c()) * map.plane_size();
  for (int b = 0; b < map.n(); ++b) {
    const T* p = map.data() + b * P;
    double s = 0;
    for (std::size_t q = 0; q < P; ++q) s += static_cast<double>(p[q]);
    out[static_cast<std::size_t>(b)] = s / static_cast<double>(P);
  }
  return out;
}

// Pooled hybrid-discriminator score of a single image (mean patch score).
template <typename T>
double hybrid_score(const PatchDiscriminator<T>& disc_h, const Tensor<T>& image) {
  return patch_mean(disc_h.forward(image));
}

// One hop: a single generator application.
template <typename T>
Tensor<T> hop(const Generator<T>& gen, const Tensor<T>& image) {
  return gen.forward(image);
}

// [input, G_1(x), ..., G_n(x)]; element 0 is the input unchanged.
template <typename T>
std::vector<Tensor<T>> hop_sequence(const Generator<T>& gen, const Tensor<T>& image, int n) {
  if (n < 0) throw ContractError("hop_sequence: hop count must be >= 0");
  std::vector<Tensor<T>> seq;
  seq.reserve(static_cast<std::size_t>(n) + 1);
  seq.push_back(image);
  for (int i = 0; i < n; ++i) seq.push_back(gen.forward(seq.back()));
  return seq;
}

// The five networks of one training setup plus architecture metadata.
// Parameter shapes do not depend on trained_hop_count.
template <typename T>
struct ModelBundle {
  GeneratorSpec generator_spec;
  DiscriminatorSpec discriminator_spec;
  int trained_hop_count = 1;
  Generator<T> gen_G;  // X -> Y direction
  Generator<T> gen_F;  // Y -> X direction
  PatchDiscriminator<T> disc_X;
  PatchDiscriminator<T> disc_Y;
  PatchDiscriminator<T> disc_H;
  std::string config_hash;
  std::int64_t created_unix = 0;

  ModelBundle(const GeneratorSpec& gspec, const DiscriminatorSpec& dspec, int hops, Rng& rng)
      : generator_spec(gspec),
        discriminator_spec(dspec),
        trained_hop_count(hops),
        gen_G(gspec, rng),
        gen_F(gspec, rng),
        disc_X(dspec, rng),
        disc_Y(dspec, rng),
        disc_H(dspec, rng) {
    if (hops < 1) throw ConfigError("ModelBundle: hop count must be >= 1");
  }
};

}  // namespace imghop

#endif  // IMGHOP_NETWORKS_HPP
