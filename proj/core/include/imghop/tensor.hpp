#ifndef IMGHOP_TENSOR_HPP
#define IMGHOP_TENSOR_HPP

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <new>
#include <utility>

namespace imghop {

// Byte accounting for tensor buffers. Lets tests measure the peak
// activation footprint of a training step without an external profiler.
namespace memstats {

inline std::atomic<long long>& current_counter() {
  static std::atomic<long long> c{0};
  return c;
}
inline std::atomic<long long>& peak_counter() {
  static std::atomic<long long> c{0};
  return c;
}

inline void on_alloc(long long bytes) {
  long long cur = current_counter().fetch_add(bytes) + bytes;
  auto& peak = peak_counter();
  long long p = peak.load();
  while (cur > p && !peak.compare_exchange_weak(p, cur)) {
  }
}

inline void on_free(long long bytes) { current_counter().fetch_sub(bytes); }

inline long long current_bytes() { return current_counter().load(); }
inline long long peak_bytes() { return peak_counter().load(); }
inline void reset_peak() { peak_counter().store(current_counter().load()); }

}  // namespace memstats

// Dense 4-D tensor in NCHW layout. Buffers are 64-byte aligned and
// zero-initialized; all allocations are reported to memstats.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) { allocate(); }

  Tensor(const Tensor& other) : n_(other.n_), c_(other.c_), h_(other.h_), w_(other.w_) {
    allocate_raw();
    if (data_) std::memcpy(data_, other.data_, size() * sizeof(T));
  }

  Tensor(Tensor&& other) noexcept { swap(other); }

  Tensor& operator=(const Tensor& other) {
    if (this != &other) {
      Tensor tmp(other);
      swap(tmp);
    }
    return *this;
  }

  Tensor& operator=(Tensor&& other) noexcept {
    if (this != &other) {
      release();
      swap(other);
    }
    return *this;
  }

  ~Tensor() { release(); }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  std::size_t size() const { return static_cast<std::size_t>(n_) * c_ * h_ * w_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(h_) * w_; }
  bool empty() const { return data_ == nullptr; }

  T* data() { return data_; }
  const T* data() const { return data_; }

  T* plane(int b, int ch) { return data_ + (static_cast<std::size_t>(b) * c_ + ch) * plane_size(); }
  const T* plane(int b, int ch) const {
    return data_ + (static_cast<std::size_t>(b) * c_ + ch) * plane_size();
  }

  T& at(int b, int ch, int y, int x) { return plane(b, ch)[static_cast<std::size_t>(y) * w_ + x]; }
  const T& at(int b, int ch, int y, int x) const {
    return plane(b, ch)[static_cast<std::size_t>(y) * w_ + x];
  }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  void fill(T v) { std::fill(data_, data_ + size(), v); }
  void zero() {
    if (data_) std::memset(data_, 0, size() * sizeof(T));
  }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.n_, o.c_, o.h_, o.w_); }

  // Skips zero initialization; for scratch buffers that are fully written
  // before any read.
  static Tensor uninitialized(int n, int c, int h, int w) {
    Tensor t;
    t.n_ = n;
    t.c_ = c;
    t.h_ = h;
    t.w_ = w;
    t.allocate_raw();
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n_, c_, h_, w_);
    const T* src = data_;
    U* dst = out.data();
    for (std::size_t i = 0, e = size(); i < e; ++i) dst[i] = static_cast<U>(src[i]);
    return out;
  }

 private:
  void allocate() {
    allocate_raw();
    if (data_) std::memset(data_, 0, size() * sizeof(T));
  }

  void allocate_raw() {
    std::size_t count = size();
    if (count == 0) return;
    std::size_t bytes = count * sizeof(T);
    data_ = static_cast<T*>(::operator new(bytes, std::align_val_t(64)));
    memstats::on_alloc(static_cast<long long>(bytes));
  }

  void release() {
    if (data_) {
      memstats::on_free(static_cast<long long>(size() * sizeof(T)));
      ::operator delete(data_, std::align_val_t(64));
      data_ = nullptr;
    }
    n_ = c_ = h_ = w_ = 0;
  }

  void swap(Tensor& o) noexcept {
    std::swap(n_, o.n_);
    std::swap(c_, o.c_);
    std::swap(h_, o.h_);
    std::swap(w_, o.w_);
    std::swap(data_, o.data_);
  }

  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  T* data_ = nullptr;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  const T* p = t.data();
  for (std::size_t i = 0, e = t.size(); i < e; ++i)
    if (!std::isfinite(static_cast<double>(p[i]))) return false;
  return true;
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

// y += alpha * x
template <typename T>
void axpy(T alpha, const Tensor<T>& x, Tensor<T>& y) {
  assert(x.same_shape(y));
  const T* xp = x.data();
  T* yp = y.data();
  for (std::size_t i = 0, e = x.size(); i < e; ++i) yp[i] += alpha * xp[i];
}

}  // namespace imghop

#endif  // IMGHOP_TENSOR_HPP
