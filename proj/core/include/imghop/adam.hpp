#ifndef IMGHOP_ADAM_HPP
#define IMGHOP_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "imghop/layers.hpp"

namespace imghop {

// Adam moments for one network's parameter list.
template <typename T>
class AdamState {
 public:
  AdamState() = default;

  explicit AdamState(const std::vector<Param<T>*>& params) { init(params); }

  void init(const std::vector<Param<T>*>& params) {
    m_.clear();
    v_.clear();
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Param<T>* p : params) {
      m_.emplace_back(Tensor<T>::zeros_like(p->value));
      v_.emplace_back(Tensor<T>::zeros_like(p->value));
    }
    t_ = 0;
  }

  void step(std::vector<Param<T>*>& params, const GradStore<T>& grads, double lr, double beta1,
            double beta2, double eps = 1e-8) {
    ++t_;
    const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
    const T one_m_b1 = static_cast<T>(1.0 - beta1), one_m_b2 = static_cast<T>(1.0 - beta2);
    const T lr_hat = static_cast<T>(lr / (1.0 - std::pow(beta1, static_cast<double>(t_))));
    const T inv_bc2 = static_cast<T>(1.0 / (1.0 - std::pow(beta2, static_cast<double>(t_))));
    const T eps_t = static_cast<T>(eps);
    using Arr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
    using ConstArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    for (Param<T>* p : params) {
      const Tensor<T>& g = grads.grad(p->id);
      const auto n = static_cast<Eigen::Index>(g.size());
      ConstArr ga(g.data(), n);
      Arr ma(m_[static_cast<std::size_t>(p->id)].data(), n);
      Arr va(v_[static_cast<std::size_t>(p->id)].data(), n);
      Arr pa(p->value.data(), n);
      ma = b1 * ma + one_m_b1 * ga;
      va = b2 * va + one_m_b2 * ga.square();
      pa -= lr_hat * ma / ((va * inv_bc2).sqrt() + eps_t);
    }
  }

  std::int64_t t() const { return t_; }
  void set_t(std::int64_t t) { t_ = t; }

  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::int64_t t_ = 0;
};

}  // namespace imghop

#endif  // IMGHOP_ADAM_HPP
