#ifndef IMGHOP_RNG_HPP
#define IMGHOP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "imghop/errors.hpp"

namespace imghop {

// Seedable generator with explicitly-defined derived distributions.
// std::uniform_*_distribution is implementation-defined, so uniforms and
// normals are built directly from mt19937 words; the same seed yields the
// same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0)
      : gen_(static_cast<std::uint32_t>(seed & 0xffffffffu) ^
             (static_cast<std::uint32_t>(seed >> 32) * 0x9e3779b9u)) {}

  std::uint32_t u32() { return gen_(); }

  std::uint64_t u64() {
    std::uint64_t hi = gen_();
    std::uint64_t lo = gen_();
    return (hi << 32) | lo;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double real01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

  // Uniform integer in [lo, hi], rejection-sampled (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ContractError("uniform_int: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(u64());  // full 64-bit range
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span + 1) % span;
    std::uint64_t v;
    do {
      v = u64();
    } while (v > limit);
    return lo + static_cast<std::int64_t>(v % span);
  }

  // Standard normal via Box-Muller. No cached spare, so the state is
  // exactly the mt19937 state and serializes cleanly.
  double normal() {
    double u1 = 1.0 - real01();  // (0, 1]
    double u2 = real01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // mt19937 textual state (portable per the standard).
  std::string save_state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (is.fail()) throw IntegrityError("Rng::load_state: malformed generator state");
  }

 private:
  std::mt19937 gen_;
};

}  // namespace imghop

#endif  // IMGHOP_RNG_HPP
