#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ptseg/graph.hpp"

namespace ptseg {

template <class T>
struct AdamConfig {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

/// Adam with bias correction over a fixed list of graph leaves. Moment
/// buffers are allocated on the first step and keyed by position, so the
/// parameter list must stay in one order for the lifetime of the optimizer.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig<T> cfg = {}) : cfg_(cfg) {}

  void step(Graph<T>& g, const std::vector<Var<T>>& params) {
    if (m_.empty()) {
      for (auto p : params) {
        m_.emplace_back(g.value(p).numel(), T(0));
        v_.emplace_back(g.value(p).numel(), T(0));
      }
    }
    if (m_.size() != params.size()) throw StateError("optimizer bound to a different parameter list");
    ++t_;
    const T c1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    const T c2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!g.requires_grad(params[i]))
        throw StateError("adam step on a tensor without gradient state (param " +
                         std::to_string(i) + ")");
      const std::vector<T>& grad = g.grad(params[i]);
      auto& val = g.value_mut(params[i]).data();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < val.size(); ++j) {
        m[j] = cfg_.beta1 * m[j] + (T(1) - cfg_.beta1) * grad[j];
        v[j] = cfg_.beta2 * v[j] + (T(1) - cfg_.beta2) * grad[j] * grad[j];
        const T mhat = m[j] / c1;
        const T vhat = v[j] / c2;
        val[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  std::uint64_t steps() const { return t_; }
  const AdamConfig<T>& config() const { return cfg_; }

  // Moment access for checkpoint/resume.
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  AdamConfig<T> cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace ptseg
