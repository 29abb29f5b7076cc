#ifndef IMGHOP_LAYERS_HPP
#define IMGHOP_LAYERS_HPP

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "imghop/errors.hpp"
#include "imghop/rng.hpp"
#include "imghop/tensor.hpp"

namespace imghop {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;

// A named, learnable tensor. Ids are assigned when a network enumerates
// its parameters and index the matching slot of a GradStore.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  int id = -1;
};

// Gradient accumulator aligned with a network's parameter list.
template <typename T>
class GradStore {
 public:
  void init_like(const std::vector<Param<T>*>& params) {
    slots_.clear();
    slots_.reserve(params.size());
    for (const Param<T>* p : params) slots_.emplace_back(Tensor<T>::zeros_like(p->value));
  }

  Tensor<T>& grad(int id) { return slots_.at(static_cast<std::size_t>(id)); }
  const Tensor<T>& grad(int id) const { return slots_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return slots_.size(); }

  void zero() {
    for (auto& t : slots_) t.zero();
  }

 private:
  std::vector<Tensor<T>> slots_;
};

template <typename T>
class Layer {
 public:
  struct Cache {
    virtual ~Cache() = default;
  };

  virtual ~Layer() = default;

  // When `cache` is non-null the call stores what backward() will need.
  virtual Tensor<T> forward(const Tensor<T>& x, std::unique_ptr<Cache>* cache) const = 0;

  // Returns dL/dx (empty tensor when need_input_grad is false) and, when
  // `grads` is non-null, accumulates dL/dparams into it.
  virtual Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache, GradStore<T>* grads,
                             bool need_input_grad) const = 0;

  virtual void collect_params(std::vector<Param<T>*>& out) {}
};

enum class PadMode { kZero, kReflect };

namespace detail {

// Reflect index into [0, n) without repeating the border sample.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

// A maximal stretch of output positions whose source indices are either
// consecutive (copyable) or all out of bounds (zero fill, src == -1).
struct GatherRun {
  std::int32_t q0;
  std::int32_t src0;  // -1: zero fill
  std::int32_t len;
};

// Precomputed gather table: for each kernel tap t and each output position q,
// the linear index into the padded input plane (-1 for zero padding), plus a
// run-length encoding of each tap row for bulk copies.
struct Im2colMap {
  int ho = 0, wo = 0;
  std::vector<std::int32_t> src;       // [k*k][ho*wo]
  std::vector<GatherRun> runs;         // concatenated per tap
  std::vector<std::int32_t> tap_runs;  // offsets into runs, size k*k + 1
  bool use_runs = false;               // false when runs degenerate (strided taps)
};

inline Im2colMap build_im2col_map(int h, int w, int k, int stride, int pad_t, int pad_l, int pad_b,
                                  int pad_r, PadMode mode) {
  Im2colMap m;
  m.ho = (h + pad_t + pad_b - k) / stride + 1;
  m.wo = (w + pad_l + pad_r - k) / stride + 1;
  if (m.ho <= 0 || m.wo <= 0) throw ContractError("conv: input smaller than kernel");
  m.src.resize(static_cast<std::size_t>(k) * k * m.ho * m.wo);
  std::size_t p = static_cast<std::size_t>(m.ho) * m.wo;
  for (int ky = 0; ky < k; ++ky) {
    for (int kx = 0; kx < k; ++kx) {
      std::int32_t* row = m.src.data() + (static_cast<std::size_t>(ky) * k + kx) * p;
      for (int oy = 0; oy < m.ho; ++oy) {
        int iy = oy * stride - pad_t + ky;
        for (int ox = 0; ox < m.wo; ++ox) {
          int ix = ox * stride - pad_l + kx;
          std::int32_t v;
          if (mode == PadMode::kReflect) {
            v = static_cast<std::int32_t>(reflect_index(iy, h) * w + reflect_index(ix, w));
          } else if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
            v = static_cast<std::int32_t>(iy * w + ix);
          } else {
            v = -1;
          }
          row[static_cast<std::size_t>(oy) * m.wo + ox] = v;
        }
      }
    }
  }
  // Run-length encode each tap row. Stride-1 taps collapse into a few long
  // copyable runs; strided taps degenerate to unit runs.
  m.tap_runs.reserve(static_cast<std::size_t>(k) * k + 1);
  m.tap_runs.push_back(0);
  for (int t = 0; t < k * k; ++t) {
    const std::int32_t* row = m.src.data() + static_cast<std::size_t>(t) * p;
    std::size_t q = 0;
    while (q < p) {
      GatherRun run{static_cast<std::int32_t>(q), row[q], 1};
      ++q;
      if (run.src0 < 0) {
        while (q < p && row[q] < 0) {
          ++run.len;
          ++q;
        }
      } else {
        while (q < p && row[q] == run.src0 + run.len) {
          ++run.len;
          ++q;
        }
      }
      m.runs.push_back(run);
    }
    m.tap_runs.push_back(static_cast<std::int32_t>(m.runs.size()));
  }
  m.use_runs = m.src.size() >= 4 * m.runs.size();
  return m;
}

// Copy helpers with inlined short paths (run lengths here are usually a few
// dozen elements, where memcpy dispatch overhead dominates).
template <typename T>
inline void copy_run(T* dst, const T* src, std::int32_t len) {
  if (len > 48) {
    std::memcpy(dst, src, static_cast<std::size_t>(len) * sizeof(T));
  } else {
    for (std::int32_t i = 0; i < len; ++i) dst[i] = src[i];
  }
}

template <typename T>
inline void zero_run(T* dst, std::int32_t len) {
  if (len > 48) {
    std::memset(dst, 0, static_cast<std::size_t>(len) * sizeof(T));
  } else {
    for (std::int32_t i = 0; i < len; ++i) dst[i] = T(0);
  }
}

// Scatter table for a stride-s transposed conv: for each kernel tap t and
// each input position q, the linear index into the output plane (-1 if the
// tap lands outside).
struct ScatterMap {
  int ho = 0, wo = 0;
  std::vector<std::int32_t> dst;  // [k*k][hi*wi]
};

inline ScatterMap build_scatter_map(int h, int w, int k, int stride, int pad, int out_pad) {
  ScatterMap m;
  m.ho = (h - 1) * stride - 2 * pad + k + out_pad;
  m.wo = (w - 1) * stride - 2 * pad + k + out_pad;
  m.dst.resize(static_cast<std::size_t>(k) * k * h * w);
  std::size_t p = static_cast<std::size_t>(h) * w;
  for (int ky = 0; ky < k; ++ky) {
    for (int kx = 0; kx < k; ++kx) {
      std::int32_t* row = m.dst.data() + (static_cast<std::size_t>(ky) * k + kx) * p;
      for (int iy = 0; iy < h; ++iy) {
        int oy = iy * stride - pad + ky;
        for (int ix = 0; ix < w; ++ix) {
          int ox = ix * stride - pad + kx;
          row[static_cast<std::size_t>(iy) * w + ix] =
              (oy >= 0 && oy < m.ho && ox >= 0 && ox < m.wo)
                  ? static_cast<std::int32_t>(oy * m.wo + ox)
                  : -1;
        }
      }
    }
  }
  return m;
}

// C (M x N, row-major) = or += A (M x K, row-major) * B (K x N, row-major).
// Few-row products are evaluated transposed so the long dimension drives the
// kernel (the 3-channel head conv is 5-10x faster that way).
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int M, int K, int N, bool accumulate) {
  using CM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
  if (M < 8 && N >= 64) {
    Eigen::Map<CM> Ct(c, N, M);
    Eigen::Map<const CM> Bt(b, N, K);
    Eigen::Map<const CM> At(a, K, M);
    if (accumulate)
      Ct.noalias() += Bt * At;
    else
      Ct.noalias() = Bt * At;
    return;
  }
  ConstMapRM<T> A(a, M, K);
  ConstMapRM<T> B(b, K, N);
  MapRM<T> C(c, M, N);
  if (accumulate)
    C.noalias() += A * B;
  else
    C.noalias() = A * B;
}

// C (M x N, row-major) = or += A (M x K, row-major) * B (N x K, row-major)^T.
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int M, int K, int N, bool accumulate) {
  using CM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
  if (M < 8 && N >= 64) {
    Eigen::Map<CM> Ct(c, N, M);
    ConstMapRM<T> B(b, N, K);
    Eigen::Map<const CM> At(a, K, M);
    if (accumulate)
      Ct.noalias() += B * At;
    else
      Ct.noalias() = B * At;
    return;
  }
  ConstMapRM<T> A(a, M, K);
  ConstMapRM<T> B(b, N, K);
  MapRM<T> C(c, M, N);
  if (accumulate)
    C.noalias() += A * B.transpose();
  else
    C.noalias() = A * B.transpose();
}

// C (M x N, row-major) = or += A (K x M, row-major)^T * B (K x N, row-major).
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int M, int K, int N, bool accumulate) {
  ConstMapRM<T> A(a, K, M);
  ConstMapRM<T> B(b, K, N);
  MapRM<T> C(c, M, N);
  if (accumulate)
    C.noalias() += A.transpose() * B;
  else
    C.noalias() = A.transpose() * B;
}

// Maps are keyed by the input plane size so fully-convolutional nets can
// accept any resolution; per layer this builds at most a handful of tables.
template <typename M>
class MapCache {
 public:
  template <typename F>
  std::shared_ptr<const M> get(int h, int w, F&& build) const {
    std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(h)) << 32) |
                        static_cast<std::uint32_t>(w);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto m = std::make_shared<M>(build());
    cache_.emplace(key, m);
    return m;
  }

 private:
  mutable std::mutex mu_;
  mutable std::unordered_map<std::uint64_t, std::shared_ptr<const M>> cache_;
};

}  // namespace detail

// 2-D convolution. Small kernels go through im2col + GEMM; stride-1
// kernels of 5x5 and up use a direct kernel instead (their im2col column
// matrix is k*k times the input and dwarfs the actual arithmetic).
// Weight layout (out_ch, in_ch, k, k); flattened rows are GEMM-ready.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  struct Cache : Layer<T>::Cache {
    Tensor<T> col;   // im2col path: (1,1,K,B*P) column matrix
    Tensor<T> xpad;  // direct path: padded input (B,Cin,Hp,Wp)
    int in_h = 0, in_w = 0, batch = 0;
  };

  Conv2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad_t, int pad_l,
         int pad_b, int pad_r, PadMode mode, Rng& rng)
      : name_(std::move(name)),
        in_ch_(in_ch),
        out_ch_(out_ch),
        k_(k),
        stride_(stride),
        pad_t_(pad_t),
        pad_l_(pad_l),
        pad_b_(pad_b),
        pad_r_(pad_r),
        mode_(mode),
        direct_(stride == 1 && k >= 5 && k <= 9) {
    weight_.name = name_ + ".weight";
    weight_.value = Tensor<T>(out_ch, in_ch, k, k);
    bias_.name = name_ + ".bias";
    bias_.value = Tensor<T>(1, 1, 1, out_ch);
    T* wp = weight_.value.data();
    for (std::size_t i = 0, e = weight_.value.size(); i < e; ++i)
      wp[i] = static_cast<T>(rng.normal(0.0, 0.02));
  }

  Conv2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad, PadMode mode,
         Rng& rng)
      : Conv2d(std::move(name), in_ch, out_ch, k, stride, pad, pad, pad, pad, mode, rng) {}

  Tensor<T> forward(const Tensor<T>& x, std::unique_ptr<typename Layer<T>::Cache>* cache)
      const override {
    if (x.c() != in_ch_) throw ContractError("Conv2d " + name_ + ": channel mismatch");
    if (direct_) return forward_direct(x, cache);
    auto map = maps_.get(x.h(), x.w(), [&] {
      return detail::build_im2col_map(x.h(), x.w(), k_, stride_, pad_t_, pad_l_, pad_b_, pad_r_,
                                      mode_);
    });
    const int B = x.n();
    const std::size_t P = static_cast<std::size_t>(map->ho) * map->wo;
    const int K = in_ch_ * k_ * k_;
    const std::size_t BP = static_cast<std::size_t>(B) * P;

    Tensor<T> col = Tensor<T>::uninitialized(1, 1, K, static_cast<int>(BP));
    fill_col(x, *map, col);

    Tensor<T> y = Tensor<T>::uninitialized(B, out_ch_, map->ho, map->wo);
    Tensor<T> ymat = Tensor<T>::uninitialized(1, 1, out_ch_, static_cast<int>(BP));
    detail::gemm_nn(weight_.value.data(), col.data(), ymat.data(), out_ch_, K,
                    static_cast<int>(BP), false);
    const T* bp = bias_.value.data();
    for (int b = 0; b < B; ++b) {
      for (int co = 0; co < out_ch_; ++co) {
        const T* src = ymat.data() + static_cast<std::size_t>(co) * BP + b * P;
        T* dst = y.plane(b, co);
        T bv = bp[co];
        for (std::size_t q = 0; q < P; ++q) dst[q] = src[q] + bv;
      }
    }
    if (cache) {
      auto c = std::make_unique<Cache>();
      c->col = std::move(col);
      c->in_h = x.h();
      c->in_w = x.w();
      c->batch = B;
      *cache = std::move(c);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const typename Layer<T>::Cache& cache,
                     GradStore<T>* grads, bool need_input_grad) const override {
    const auto& c = static_cast<const Cache&>(cache);
    if (direct_) return backward_direct(gy, c, grads, need_input_grad);
    auto map = maps_.get(c.in_h, c.in_w, [&] {
      return detail::build_im2col_map(c.in_h, c.in_w, k_, stride_, pad_t_, pad_l_, pad_b_, pad_r_,
                                      mode_);
    });
    const int B = c.batch;
    const std::size_t P = static_cast<std::size_t>(map->ho) * map->wo;
    const int K = in_ch_ * k_ * k_;
    const std::size_t BP = static_cast<std::size_t>(B) * P;

    // Regroup gy (NCHW) into an (out_ch x B*P) matrix.
    Tensor<T> gymat = Tensor<T>::uninitialized(1, 1, out_ch_, static_cast<int>(BP));
    for (int b = 0; b < B; ++b) {
      for (int co = 0; co < out_ch_; ++co) {
        std::memcpy(gymat.data() + static_cast<std::size_t>(co) * BP + b * P, gy.plane(b, co),
                    P * sizeof(T));
      }
    }

    if (grads) {
      detail::gemm_nt(gymat.data(), c.col.data(), grads->grad(weight_.id).data(), out_ch_,
                      static_cast<int>(BP), K, true);
      ConstMapRM<T> GY(gymat.data(), out_ch_, static_cast<Eigen::Index>(BP));
      T* gb = grads->grad(bias_.id).data();
      for (int co = 0; co < out_ch_; ++co)
        gb[co] += GY.row(co).sum();
    }

    Tensor<T> gx;
    if (need_input_grad) {
      Tensor<T> gcol = Tensor<T>::uninitialized(1, 1, K, static_cast<int>(BP));
      detail::gemm_tn(weight_.value.data(), gymat.data(), gcol.data(), K, out_ch_,
                      static_cast<int>(BP), false);
      gx = Tensor<T>(B, in_ch_, c.in_h, c.in_w);
      const std::size_t taps = static_cast<std::size_t>(k_) * k_;
      for (int ci = 0; ci < in_ch_; ++ci) {
        for (int b = 0; b < B; ++b) {
          T* dst = gx.plane(b, ci);
          const T* chan = gcol.data() + ci * taps * BP + b * P;
          if (map->use_runs) {
            for (std::size_t t = 0; t < taps; ++t) {
              const detail::GatherRun* rbeg = map->runs.data() + map->tap_runs[t];
              const detail::GatherRun* rend = map->runs.data() + map->tap_runs[t + 1];
              const T* src = chan + t * BP;
              for (const detail::GatherRun* r = rbeg; r != rend; ++r) {
                if (r->src0 < 0) continue;
                const T* s = src + r->q0;
                T* d = dst + r->src0;
                for (std::int32_t i = 0; i < r->len; ++i) d[i] += s[i];
              }
            }
          } else {
            for (std::size_t t = 0; t < taps; ++t) {
              const std::int32_t* mp = map->src.data() + t * P;
              const T* src = chan + t * BP;
              for (std::size_t q = 0; q < P; ++q) {
                std::int32_t idx = mp[q];
                if (idx >= 0) dst[idx] += src[q];
              }
            }
          }
        }
      }
    }
    return gx;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  int out_channels() const { return out_ch_; }

 private:
  Tensor<T> pad_input(const Tensor<T>& x) const {
    const int H = x.h(), W = x.w();
    const int hp = H + pad_t_ + pad_b_, wp = W + pad_l_ + pad_r_;
    Tensor<T> xp = Tensor<T>::uninitialized(x.n(), in_ch_, hp, wp);
    for (int b = 0; b < x.n(); ++b) {
      for (int ci = 0; ci < in_ch_; ++ci) {
        const T* src = x.plane(b, ci);
        T* dst = xp.plane(b, ci);
        for (int py = 0; py < hp; ++py) {
          T* drow = dst + static_cast<std::size_t>(py) * wp;
          int iy = py - pad_t_;
          if (mode_ == PadMode::kReflect) {
            const T* srow = src + static_cast<std::size_t>(detail::reflect_index(iy, H)) * W;
            for (int px = 0; px < pad_l_; ++px)
              drow[px] = srow[detail::reflect_index(px - pad_l_, W)];
            std::memcpy(drow + pad_l_, srow, static_cast<std::size_t>(W) * sizeof(T));
            for (int px = pad_l_ + W; px < wp; ++px)
              drow[px] = srow[detail::reflect_index(px - pad_l_, W)];
          } else if (iy < 0 || iy >= H) {
            std::memset(drow, 0, static_cast<std::size_t>(wp) * sizeof(T));
          } else {
            const T* srow = src + static_cast<std::size_t>(iy) * W;
            for (int px = 0; px < pad_l_; ++px) drow[px] = T(0);
            std::memcpy(drow + pad_l_, srow, static_cast<std::size_t>(W) * sizeof(T));
            for (int px = pad_l_ + W; px < wp; ++px) drow[px] = T(0);
          }
        }
      }
    }
    return xp;
  }

  // The direct kernels flatten output rows onto the padded-plane grid
  // (zero stripes where the padding columns sit), so every kernel tap is
  // one long vector operation over the plane instead of per-row loops.
  Tensor<T> forward_direct(const Tensor<T>& x,
                           std::unique_ptr<typename Layer<T>::Cache>* cache) const {
    using Vec = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
    using ConstVec = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    const int B = x.n(), H = x.h(), W = x.w();
    const int ho = H + pad_t_ + pad_b_ - k_ + 1;
    const int wo = W + pad_l_ + pad_r_ - k_ + 1;
    if (ho <= 0 || wo <= 0) throw ContractError("conv: input smaller than kernel");
    const int wp = W + pad_l_ + pad_r_;
    const auto L = static_cast<Eigen::Index>(ho - 1) * wp + wo;
    Tensor<T> xpad = pad_input(x);
    Tensor<T> y = Tensor<T>::uninitialized(B, out_ch_, ho, wo);
    std::vector<T> yz(static_cast<std::size_t>(L));
    const T* wgt = weight_.value.data();
    const T* bp = bias_.value.data();
    for (int b = 0; b < B; ++b) {
      for (int m = 0; m < out_ch_; ++m) {
        Vec acc(yz.data(), L);
        acc.setZero();
        for (int ci = 0; ci < in_ch_; ++ci) {
          const T* xpl = xpad.plane(b, ci);
          const T* wr = wgt + (static_cast<std::size_t>(m) * in_ch_ + ci) * k_ * k_;
          for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx)
              acc += wr[ky * k_ + kx] * ConstVec(xpl + static_cast<std::size_t>(ky) * wp + kx, L);
        }
        const T bv = bp[m];
        T* dst = y.plane(b, m);
        for (int oy = 0; oy < ho; ++oy) {
          const T* src = yz.data() + static_cast<std::size_t>(oy) * wp;
          T* drow = dst + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) drow[ox] = src[ox] + bv;
        }
      }
    }
    if (cache) {
      auto c = std::make_unique<Cache>();
      c->xpad = std::move(xpad);
      c->in_h = H;
      c->in_w = W;
      c->batch = B;
      *cache = std::move(c);
    }
    return y;
  }

  Tensor<T> backward_direct(const Tensor<T>& gy, const Cache& c, GradStore<T>* grads,
                            bool need_input_grad) const {
    using Vec = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
    using ConstVec = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    const int B = c.batch, H = c.in_h, W = c.in_w;
    const int ho = gy.h(), wo = gy.w();
    const int wp = W + pad_l_ + pad_r_;
    const int hp = H + pad_t_ + pad_b_;
    const auto L = static_cast<Eigen::Index>(ho - 1) * wp + wo;
    const T* wgt = weight_.value.data();

    // Output-row gradients laid onto the padded grid with zero stripes.
    std::vector<T> gz(static_cast<std::size_t>(L));
    auto fill_gz = [&](const T* gpl) {
      for (int oy = 0; oy < ho; ++oy) {
        T* dst = gz.data() + static_cast<std::size_t>(oy) * wp;
        std::memcpy(dst, gpl + static_cast<std::size_t>(oy) * wo,
                    static_cast<std::size_t>(wo) * sizeof(T));
        if (oy + 1 < ho)
          std::memset(dst + wo, 0, static_cast<std::size_t>(wp - wo) * sizeof(T));
      }
    };

    Tensor<T> dxp;
    if (need_input_grad) dxp = Tensor<T>(B, in_ch_, hp, wp);

    for (int b = 0; b < B; ++b) {
      for (int m = 0; m < out_ch_; ++m) {
        const T* gpl = gy.plane(b, m);
        fill_gz(gpl);
        ConstVec gv(gz.data(), L);
        if (grads) {
          T* gb = grads->grad(bias_.id).data();
          gb[m] += ConstVec(gpl, static_cast<Eigen::Index>(gy.plane_size())).sum();
        }
        for (int ci = 0; ci < in_ch_; ++ci) {
          const T* xpl = c.xpad.plane(b, ci);
          const std::size_t woff = (static_cast<std::size_t>(m) * in_ch_ + ci) * k_ * k_;
          if (grads) {
            T* gwr = grads->grad(weight_.id).data() + woff;
            for (int ky = 0; ky < k_; ++ky)
              for (int kx = 0; kx < k_; ++kx)
                gwr[ky * k_ + kx] +=
                    (gv * ConstVec(xpl + static_cast<std::size_t>(ky) * wp + kx, L)).sum();
          }
          if (need_input_grad) {
            T* dxpl = dxp.plane(b, ci);
            const T* wr = wgt + woff;
            for (int ky = 0; ky < k_; ++ky)
              for (int kx = 0; kx < k_; ++kx)
                Vec(dxpl + static_cast<std::size_t>(ky) * wp + kx, L) += wr[ky * k_ + kx] * gv;
          }
        }
      }
    }

    Tensor<T> gx;
    if (need_input_grad) {
      // Fold padded-coordinate gradients back onto the source pixels.
      gx = Tensor<T>(B, in_ch_, H, W);
      for (int b = 0; b < B; ++b) {
        for (int ci = 0; ci < in_ch_; ++ci) {
          const T* src = dxp.plane(b, ci);
          T* dst = gx.plane(b, ci);
          for (int py = 0; py < hp; ++py) {
            int iy = py - pad_t_;
            const T* srow = src + static_cast<std::size_t>(py) * wp;
            if (mode_ == PadMode::kReflect) {
              T* drow = dst + static_cast<std::size_t>(detail::reflect_index(iy, H)) * W;
              for (int px = 0; px < wp; ++px)
                drow[detail::reflect_index(px - pad_l_, W)] += srow[px];
            } else {
              if (iy < 0 || iy >= H) continue;
              T* drow = dst + static_cast<std::size_t>(iy) * W;
              for (int px = pad_l_; px < pad_l_ + W; ++px) drow[px - pad_l_] += srow[px];
            }
          }
        }
      }
    }
    return gx;
  }

  void fill_col(const Tensor<T>& x, const detail::Im2colMap& map, Tensor<T>& col) const {
    const int B = x.n();
    const std::size_t P = static_cast<std::size_t>(map.ho) * map.wo;
    const std::size_t BP = static_cast<std::size_t>(B) * P;
    const std::size_t taps = static_cast<std::size_t>(k_) * k_;
    for (int ci = 0; ci < in_ch_; ++ci) {
      for (int b = 0; b < B; ++b) {
        const T* plane = x.plane(b, ci);
        T* chan = col.data() + ci * taps * BP + b * P;
        if (map.use_runs) {
          for (std::size_t t = 0; t < taps; ++t) {
            const detail::GatherRun* rbeg = map.runs.data() + map.tap_runs[t];
            const detail::GatherRun* rend = map.runs.data() + map.tap_runs[t + 1];
            T* dst = chan + t * BP;
            for (const detail::GatherRun* r = rbeg; r != rend; ++r) {
              if (r->src0 < 0) {
                detail::zero_run(dst + r->q0, r->len);
              } else {
                detail::copy_run(dst + r->q0, plane + r->src0, r->len);
              }
            }
          }
        } else {
          for (std::size_t t = 0; t < taps; ++t) {
            const std::int32_t* mp = map.src.data() + t * P;
            T* dst = chan + t * BP;
            for (std::size_t q = 0; q < P; ++q) {
              std::int32_t idx = mp[q];
              dst[q] = idx >= 0 ? plane[idx] : T(0);
            }
          }
        }
      }
    }
  }

  std::string name_;
  int in_ch_, out_ch_, k_, stride_;
  int pad_t_, pad_l_, pad_b_, pad_r_;
  PadMode mode_;
  bool direct_;
  Param<T> weight_;
  Param<T> bias_;
  detail::MapCache<detail::Im2colMap> maps_;
};

// Fractionally-strided (transposed) convolution.
// Weight layout (in_ch, out_ch, k, k); output size = in*stride when
// k=3, pad=1, out_pad=1, stride=2.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  struct Cache : Layer<T>::Cache {
    Tensor<T> xmat;  // (1,1,Cin,B*Pin)
    int in_h = 0, in_w = 0, batch = 0;
  };

  ConvTranspose2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad, int out_pad,
                  Rng& rng)
      : name_(std::move(name)),
        in_ch_(in_ch),
        out_ch_(out_ch),
        k_(k),
        stride_(stride),
        pad_(pad),
        out_pad_(out_pad) {
    weight_.name = name_ + ".weight";
    weight_.value = Tensor<T>(in_ch, out_ch, k, k);
    bias_.name = name_ + ".bias";
    bias_.value = Tensor<T>(1, 1, 1, out_ch);
    T* wp = weight_.value.data();
    for (std::size_t i = 0, e = weight_.value.size(); i < e; ++i)
      wp[i] = static_cast<T>(rng.normal(0.0, 0.02));
  }

  Tensor<T> forward(const Tensor<T>& x, std::unique_ptr<typename Layer<T>::Cache>* cache)
      const override {
    if (x.c() != in_ch_) throw ContractError("ConvTranspose2d " + name_ + ": channel mismatch");
    auto map = maps_.get(x.h(), x.w(),
                         [&] { return detail::build_scatter_map(x.h(), x.w(), k_, stride_, pad_,
                                                                out_pad_); });
    const int B = x.n();
    const std::size_t Pin = x.plane_size();
    const std::size_t BP = static_cast<std::size_t>(B) * Pin;
    const int Kc = out_ch_ * k_ * k_;

    Tensor<T> xmat = Tensor<T>::uninitialized(1, 1, in_ch_, static_cast<int>(BP));
    for (int b = 0; b < B; ++b)
      for (int ci = 0; ci < in_ch_; ++ci)
        std::memcpy(xmat.data() + static_cast<std::size_t>(ci) * BP + b * Pin, x.plane(b, ci),
                    Pin * sizeof(T));

    Tensor<T> colt = Tensor<T>::uninitialized(1, 1, Kc, static_cast<int>(BP));
    detail::gemm_tn(weight_.value.data(), xmat.data(), colt.data(), Kc, in_ch_,
                    static_cast<int>(BP), false);

    Tensor<T> y(B, out_ch_, map->ho, map->wo);
    const std::size_t taps = static_cast<std::size_t>(k_) * k_;
    for (int b = 0; b < B; ++b) {
      for (int co = 0; co < out_ch_; ++co) {
        T* dst = y.plane(b, co);
        for (std::size_t t = 0; t < taps; ++t) {
          const std::int32_t* mp = map->dst.data() + t * Pin;
          const T* src = colt.data() + (co * taps + t) * BP + b * Pin;
          for (std::size_t q = 0; q < Pin; ++q) {
            std::int32_t idx = mp[q];
            if (idx >= 0) dst[idx] += src[q];
          }
        }
        T bv = bias_.value.data()[co];
        std::size_t Pout = y.plane_size();
        for (std::size_t q = 0; q < Pout; ++q) dst[q] += bv;
      }
    }
    if (cache) {
      auto c = std::make_unique<Cache>();
      c->xmat = std::move(xmat);
      c->in_h = x.h();
      c->in_w = x.w();
      c->batch = B;
      *cache = std::move(c);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const typename Layer<T>::Cache& cache,
                     GradStore<T>* grads, bool need_input_grad) const override {
    const auto& c = static_cast<const Cache&>(cache);
    auto map = maps_.get(c.in_h, c.in_w,
                         [&] { return detail::build_scatter_map(c.in_h, c.in_w, k_, stride_, pad_,
                                                                out_pad_); });
    const int B = c.batch;
    const std::size_t Pin = static_cast<std::size_t>(c.in_h) * c.in_w;
    const std::size_t BP = static_cast<std::size_t>(B) * Pin;
    const int Kc = out_ch_ * k_ * k_;
    const std::size_t taps = static_cast<std::size_t>(k_) * k_;

    // Gather gy through the scatter map: gcolt[(co,t)][(b,q)] = gy at tap target.
    Tensor<T> gcolt = Tensor<T>::uninitialized(1, 1, Kc, static_cast<int>(BP));
    for (int b = 0; b < B; ++b) {
      for (int co = 0; co < out_ch_; ++co) {
        const T* src = gy.plane(b, co);
        for (std::size_t t = 0; t < taps; ++t) {
          const std::int32_t* mp = map->dst.data() + t * Pin;
          T* dst = gcolt.data() + (co * taps + t) * BP + b * Pin;
          for (std::size_t q = 0; q < Pin; ++q) {
            std::int32_t idx = mp[q];
            dst[q] = idx >= 0 ? src[idx] : T(0);
          }
        }
      }
    }

    if (grads) {
      detail::gemm_nt(c.xmat.data(), gcolt.data(), grads->grad(weight_.id).data(), in_ch_,
                      static_cast<int>(BP), Kc, true);
      T* gb = grads->grad(bias_.id).data();
      for (int co = 0; co < out_ch_; ++co) {
        double s = 0;
        for (int b = 0; b < B; ++b) {
          const T* src = gy.plane(b, co);
          for (std::size_t q = 0, e = gy.plane_size(); q < e; ++q) s += static_cast<double>(src[q]);
        }
        gb[co] += static_cast<T>(s);
      }
    }

    Tensor<T> gx;
    if (need_input_grad) {
      Tensor<T> gxmat = Tensor<T>::uninitialized(1, 1, in_ch_, static_cast<int>(BP));
      detail::gemm_nn(weight_.value.data(), gcolt.data(), gxmat.data(), in_ch_, Kc,
                      static_cast<int>(BP), false);
      gx = Tensor<T>::uninitialized(B, in_ch_, c.in_h, c.in_w);
      for (int b = 0; b < B; ++b)
        for (int ci = 0; ci < in_ch_; ++ci)
          std::memcpy(gx.plane(b, ci), gxmat.data() + static_cast<std::size_t>(ci) * BP + b * Pin,
                      Pin * sizeof(T));
    }
    return gx;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  std::string name_;
  int in_ch_, out_ch_, k_, stride_, pad_, out_pad_;
  Param<T> weight_;
  Param<T> bias_;
  detail::MapCache<detail::ScatterMap> maps_;
};

// Per-image, per-channel normalization without affine parameters.
template <typename T>
class InstanceNorm2d final : public Layer<T> {
 public:
  struct Cache : Layer<T>::Cache {
    Tensor<T> xhat;
    std::vector<T> inv_std;  // per (b, c)
  };

  explicit InstanceNorm2d(double eps = 1e-5) : eps_(eps) {}

  Tensor<T> forward(const Tensor<T>& x, std::unique_ptr<typename Layer<T>::Cache>* cache)
      const override {
    Tensor<T> y = Tensor<T>::zeros_like(x);
    auto c = cache ? std::make_unique<Cache>() : nullptr;
    if (c) {
      c->xhat = Tensor<T>::zeros_like(x);
      c->inv_std.resize(static_cast<std::size_t>(x.n()) * x.c());
    }
    using Arr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
    using ConstArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    const auto P = static_cast<Eigen::Index>(x.plane_size());
    for (int b = 0; b < x.n(); ++b) {
      for (int ch = 0; ch < x.c(); ++ch) {
        ConstArr src(x.plane(b, ch), P);
        Arr dst(y.plane(b, ch), P);
        T mu = src.sum() / static_cast<T>(P);
        T var = (src - mu).square().sum() / static_cast<T>(P);
        T inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps_));
        dst = (src - mu) * inv_std;
        if (c) {
          std::memcpy(c->xhat.plane(b, ch), y.plane(b, ch), static_cast<std::size_t>(P) * sizeof(T));
          c->inv_std[static_cast<std::size_t>(b) * x.c() + ch] = inv_std;
        }
      }
    }
    if (cache) *cache = std::move(c);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const typename Layer<T>::Cache& cache,
                     GradStore<T>* /*grads*/, bool need_input_grad) const override {
    if (!need_input_grad) return {};
    const auto& c = static_cast<const Cache&>(cache);
    Tensor<T> gx = Tensor<T>::zeros_like(gy);
    using Arr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
    using ConstArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    const auto P = static_cast<Eigen::Index>(gy.plane_size());
    for (int b = 0; b < gy.n(); ++b) {
      for (int ch = 0; ch < gy.c(); ++ch) {
        ConstArr g(gy.plane(b, ch), P);
        ConstArr xh(c.xhat.plane(b, ch), P);
        Arr dst(gx.plane(b, ch), P);
        T m1 = g.sum() / static_cast<T>(P);
        T m2 = (g * xh).sum() / static_cast<T>(P);
        T inv_std = c.inv_std[static_cast<std::size_t>(b) * gy.c() + ch];
        dst = inv_std * (g - m1 - xh * m2);
      }
    }
    return gx;
  }

 private:
  double eps_;
};

namespace detail {

template <typename T>
using FlatArr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstFlatArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

}  // namespace detail

template <typename T>
class ReLU final : public Layer<T> {
 public:
  struct Cache : Layer<T>::Cache {
    Tensor<T> y;
  };

  Tensor<T> forward(const Tensor<T>& x, std::unique_ptr<typename Layer<T>::Cache>* cache)
      const override {
    Tensor<T> y = Tensor<T>::zeros_like(x);
    const auto n = static_cast<Eigen::Index>(x.size());
    detail::FlatArr<T>(y.data(), n) = detail::ConstFlatArr<T>(x.data(), n).max(T(0));
    if (cache) {
      auto c = std::make_unique<Cache>();
      c->y = y;
      *cache = std::move(c);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const typename Layer<T>::Cache& cache,
                     GradStore<T>* /*grads*/, bool need_input_grad) const override {
    if (!need_input_grad) return {};
    const auto& c = static_cast<const Cache&>(cache);
    Tensor<T> gx = Tensor<T>::zeros_like(gy);
    const auto n = static_cast<Eigen::Index>(gy.size());
    detail::FlatArr<T>(gx.data(), n) =
        (detail::ConstFlatArr<T>(c.y.data(), n) > T(0))
            .select(detail::ConstFlatArr<T>(gy.data(), n), T(0));
    return gx;
  }
};

template <typename T>
class LeakyReLU final : public Layer<T> {
 public:
  struct Cache : Layer<T>::Cache {
    Tensor<T> y;
  };

  explicit LeakyReLU(double slope) : slope_(static_cast<T>(slope)) {}

  Tensor<T> forward(const Tensor<T>& x, std::unique_ptr<typename Layer<T>::Cache>* cache)
      const override {
    Tensor<T> y = Tensor<T>::zeros_like(x);
    const auto n = static_cast<Eigen::Index>(x.size());
    detail::ConstFlatArr<T> xs(x.data(), n);
    // For slope in (0, 1): max(x, slope*x) selects x when positive.
    detail::FlatArr<T>(y.data(), n) = xs.max(xs * slope_);
    if (cache) {
      auto c = std::make_unique<Cache>();
      c->y = y;
      *cache = std::move(c);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const typename Layer<T>::Cache& cache,
                     GradStore<T>* /*grads*/, bool need_input_grad) const override {
    if (!need_input_grad) return {};
    const auto& c = static_cast<const Cache&>(cache);
    Tensor<T> gx = Tensor<T>::zeros_like(gy);
    const auto n = static_cast<Eigen::Index>(gy.size());
    detail::ConstFlatArr<T> g(gy.data(), n);
    detail::FlatArr<T>(gx.data(), n) =
        (detail::ConstFlatArr<T>(c.y.data(), n) > T(0)).select(g, g * slope_);
    return gx;
  }

 private:
  T slope_;
};

template <typename T>
class Tanh final : public Layer<T> {
 public:
  struct Cache : Layer<T>::Cache {
    Tensor<T> y;
  };

  Tensor<T> forward(const Tensor<T>& x, std::unique_ptr<typename Layer<T>::Cache>* cache)
      const override {
    Tensor<T> y = Tensor<T>::zeros_like(x);
    const auto n = static_cast<Eigen::Index>(x.size());
    detail::FlatArr<T>(y.data(), n) = detail::ConstFlatArr<T>(x.data(), n).tanh();
    if (cache) {
      auto c = std::make_unique<Cache>();
      c->y = y;
      *cache = std::move(c);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const typename Layer<T>::Cache& cache,
                     GradStore<T>* /*grads*/, bool need_input_grad) const override {
    if (!need_input_grad) return {};
    const auto& c = static_cast<const Cache&>(cache);
    Tensor<T> gx = Tensor<T>::zeros_like(gy);
    const auto n = static_cast<Eigen::Index>(gy.size());
    detail::ConstFlatArr<T> g(gy.data(), n);
    detail::ConstFlatArr<T> y(c.y.data(), n);
    detail::FlatArr<T>(gx.data(), n) = g * (T(1) - y.square());
    return gx;
  }
};

// conv-norm-relu-conv-norm with an additive skip, reflection padding.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  struct Cache : Layer<T>::Cache {
    std::unique_ptr<typename Layer<T>::Cache> c1, n1, r1, c2, n2;
  };

  ResidualBlock(const std::string& name, int channels, Rng& rng)
      : conv1_(name + ".conv1", channels, channels, 3, 1, 1, PadMode::kReflect, rng),
        conv2_(name + ".conv2", channels, channels, 3, 1, 1, PadMode::kReflect, rng) {}

  Tensor<T> forward(const Tensor<T>& x, std::unique_ptr<typename Layer<T>::Cache>* cache)
      const override {
    auto c = cache ? std::make_unique<Cache>() : nullptr;
    Tensor<T> t = conv1_.forward(x, c ? &c->c1 : nullptr);
    t = norm1_.forward(t, c ? &c->n1 : nullptr);
    t = relu_.forward(t, c ? &c->r1 : nullptr);
    t = conv2_.forward(t, c ? &c->c2 : nullptr);
    t = norm2_.forward(t, c ? &c->n2 : nullptr);
    axpy(T(1), x, t);  // skip connection
    if (cache) *cache = std::move(c);
    return t;
  }

  Tensor<T> backward(const Tensor<T>& gy, const typename Layer<T>::Cache& cache,
                     GradStore<T>* grads, bool need_input_grad) const override {
    const auto& c = static_cast<const Cache&>(cache);
    Tensor<T> g = norm2_.backward(gy, *c.n2, grads, true);
    g = conv2_.backward(g, *c.c2, grads, true);
    g = relu_.backward(g, *c.r1, grads, true);
    g = norm1_.backward(g, *c.n1, grads, true);
    g = conv1_.backward(g, *c.c1, grads, need_input_grad);
    if (!need_input_grad) return {};
    axpy(T(1), gy, g);  // skip path gradient
    return g;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    conv1_.collect_params(out);
    conv2_.collect_params(out);
  }

 private:
  Conv2d<T> conv1_;
  Conv2d<T> conv2_;
  InstanceNorm2d<T> norm1_, norm2_;
  ReLU<T> relu_;
};

}  // namespace imghop

#endif  // IMGHOP_LAYERS_HPP
