#ifndef IMGHOP_TEST_HELPERS_HPP
#define IMGHOP_TEST_HELPERS_HPP

#include <cmath>
#include <filesystem>
#include <string>

#include "imghop/rng.hpp"
#include "imghop/tensor.hpp"

namespace imghop::test {

template <typename T>
Tensor<T> random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(n, c, h, w);
  T* p = t.data();
  for (std::size_t i = 0, e = t.size(); i < e; ++i)
    p[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0, e = a.size(); i < e; ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  return m;
}

// Relative error with a floor so near-zero pairs compare cleanly.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Unique scratch directory under the build tree.
inline std::string scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("imghop_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace imghop::test

#endif  // IMGHOP_TEST_HELPERS_HPP
