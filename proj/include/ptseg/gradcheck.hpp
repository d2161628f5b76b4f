#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ptseg/gru.hpp"
#include "ptseg/init.hpp"

namespace ptseg {

struct GradCheckResult {
  std::vector<double> max_rel_err_per_input;
  double worst = 0.0;
  bool pass(double tol) const { return worst <= tol; }
};

/// Compares analytic gradients against central finite differences
/// (f(x+e) - f(x-e)) / 2e for every element of every input. The relative
/// error denominator is max(|analytic|, |numeric|, 1e-8). Gradient checking
/// always runs in 64-bit mode; the builder is handed fresh leaves each
/// evaluation, so it must not keep state between calls.
template <class Builder>
GradCheckResult grad_check(Builder&& build, const std::vector<Tensor<double>>& inputs,
                           double eps = 1e-5) {
  auto eval = [&](const std::vector<Tensor<double>>& xs, bool want_grads,
                  std::vector<std::vector<double>>* grads) -> double {
    Graph<double> g;
    std::vector<Var<double>> leaves;
    leaves.reserve(xs.size());
    for (const auto& x : xs) leaves.push_back(g.leaf(x, true));
    Var<double> out = build(g, leaves);
    if (g.value(out).numel() != 1)
      throw ArgError("grad_check requires a scalar graph output, got shape " +
                     shape_str(g.value(out).shape()));
    if (want_grads) {
      g.backward(out);
      grads->clear();
      for (auto l : leaves) grads->push_back(g.grad(l));
    }
    return g.value(out)[0];
  };

  std::vector<std::vector<double>> analytic;
  eval(inputs, true, &analytic);

  GradCheckResult res;
  res.max_rel_err_per_input.assign(inputs.size(), 0.0);
  std::vector<Tensor<double>> work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      const double orig = work[i][j];
      work[i][j] = orig + eps;
      const double fp = eval(work, false, nullptr);
      work[i][j] = orig - eps;
      const double fm = eval(work, false, nullptr);
      work[i][j] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      res.max_rel_err_per_input[i] = std::max(res.max_rel_err_per_input[i], rel);
      res.worst = std::max(res.worst, rel);
    }
  }
  return res;
}

struct GradCheckEntry {
  std::string name;
  double max_rel_err;
  double tolerance;
  bool pass;
};

namespace detail {

/// Uniform values kept away from zero so kinked ops (relu) and ties
/// (max pooling) are not probed inside their non-differentiable bands.
inline Tensor<double> spread_tensor(Shape shape, Rng& rng, double band = 1e-3) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) {
    double x;
    do {
      x = rng.uniform(-1.0, 1.0);
    } while (std::abs(x) < band);
    v = x;
  }
  return t;
}

}  // namespace detail

/// Finite-difference check of every differentiable operator, each wrapped
/// into a scalar objective. Used by both the test suite and the gradcheck
/// CLI subcommand.
inline std::vector<GradCheckEntry> run_operator_gradcheck(std::uint64_t seed = 2024) {
  std::vector<GradCheckEntry> out;
  Rng rng(seed);
  auto record = [&](const std::string& name, const GradCheckResult& r, double tol) {
    out.push_back({name, r.worst, tol, r.worst <= tol});
  };

  {
    std::vector<Tensor<double>> in{detail::spread_tensor({4, 3}, rng),
                                   detail::spread_tensor({3, 5}, rng),
                                   detail::spread_tensor({5}, rng)};
    auto r = grad_check(
        [](Graph<double>& g, const std::vector<Var<double>>& v) {
          return g.sum(g.linear(v[0], v[1], v[2]));
        },
        in);
    record("linear", r, 1e-6);
  }
  {
    std::vector<Tensor<double>> in{detail::spread_tensor({4, 6}, rng)};
    auto r = grad_check(
        [](Graph<double>& g, const std::vector<Var<double>>& v) { return g.sum(g.relu(v[0])); },
        in);
    record("relu", r, 1e-6);
  }
  {
    std::vector<Tensor<double>> in{detail::spread_tensor({3, 4}, rng), detail::spread_tensor({4, 2}, rng)};
    auto r = grad_check(
        [](Graph<double>& g, const std::vector<Var<double>>& v) {
          return g.sum(g.matmul(v[0], v[1]));
        },
        in);
    record("matmul", r, 1e-6);
  }
  {
    // Weighted sum downstream of the pool so each column's routing matters.
    Tensor<double> x({5, 4});
    for (std::size_t i = 0; i < x.numel(); ++i)
      x[i] = 0.05 * static_cast<double>(i % 7) + rng.uniform(-0.01, 0.01);
    std::vector<Tensor<double>> in{x, detail::spread_tensor({4}, rng)};
    auto r = grad_check(
        [](Graph<double>& g, const std::vector<Var<double>>& v) {
          auto pooled = g.max_pool_rows(v[0]).out;
          return g.sum(g.mul(pooled, v[1]));
        },
        in);
    record("max_pool_rows", r, 1e-6);
  }
  {
    std::vector<Tensor<double>> in{detail::spread_tensor({3}, rng), detail::spread_tensor({5, 3}, rng)};
    auto r = grad_check(
        [](Graph<double>& g, const std::vector<Var<double>>& v) {
          return g.sum(g.mul(g.stack_rows(v[0], 5), v[1]));
        },
        in);
    record("stack_rows", r, 1e-6);
  }
  {
    std::vector<Tensor<double>> in{detail::spread_tensor({4, 2}, rng),
                                   detail::spread_tensor({4, 3}, rng),
                                   detail::spread_tensor({4, 1}, rng),
                                   detail::spread_tensor({4, 6}, rng)};
    auto r = grad_check(
        [](Graph<double>& g, const std::vector<Var<double>>& v) {
          auto cat = g.concat_cols({v[0], v[1], v[2]});
          return g.sum(g.mul(cat, v[3]));
        },
        in);
    record("concat_cols", r, 1e-6);
  }
  {
    std::vector<Tensor<double>> in{detail::spread_tensor({5, 4}, rng)};
    const std::vector<std::int32_t> labels{0, 2, 1, 3, 2};
    auto r = grad_check(
        [labels](Graph<double>& g, const std::vector<Var<double>>& v) {
          return g.softmax_cross_entropy(v[0], labels);
        },
        in);
    record("softmax_cross_entropy", r, 1e-6);
  }
  {
    std::vector<Tensor<double>> in{detail::spread_tensor({3, 4}, rng)};
    auto r = grad_check(
        [](Graph<double>& g, const std::vector<Var<double>>& v) {
          return g.sum(g.sigmoid(v[0]));
        },
        in);
    record("sigmoid", r, 1e-6);
  }
  {
    std::vector<Tensor<double>> in{detail::spread_tensor({3, 4}, rng)};
    auto r = grad_check(
        [](Graph<double>& g, const std::vector<Var<double>>& v) {
          return g.sum(g.tanh_op(v[0]));
        },
        in);
    record("tanh", r, 1e-6);
  }
  {
    std::vector<Tensor<double>> in{detail::spread_tensor({2, 3}, rng), detail::spread_tensor({2, 3}, rng)};
    auto r = grad_check(
        [](Graph<double>& g, const std::vector<Var<double>>& v) {
          return g.sum(g.mul(g.one_minus(g.scale(v[0], 0.7)), v[1]));
        },
        in);
    record("scale/one_minus/mul", r, 1e-6);
  }
  {
    // Three chained GRU cells; gradient of the final-state sum w.r.t. every
    // parameter and every input.
    const std::size_t din = 3, hd = 4;
    std::vector<Tensor<double>> in;
    for (int k = 0; k < 3; ++k) in.push_back(detail::spread_tensor({hd, din}, rng));
    for (int k = 0; k < 3; ++k) in.push_back(detail::spread_tensor({hd, hd}, rng));
    for (int k = 0; k < 3; ++k) in.push_back(detail::spread_tensor({hd}, rng));
    for (int k = 0; k < 3; ++k) in.push_back(detail::spread_tensor({din}, rng));
    auto r = grad_check(
        [hd](Graph<double>& g, const std::vector<Var<double>>& v) {
          GruParams<double> p{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
          Var<double> h = g.constant(Tensor<double>(Shape{hd}));
          for (int s = 0; s < 3; ++s) h = gru_step(g, v[9 + s], h, p);
          return g.sum(h);
        },
        in);
    record("gru_step(3-chain)", r, 1e-5);
  }
  {
    // Composite graph: MLP -> pool -> concat -> MLP, the wiring pattern the
    // models are built from.
    std::vector<Tensor<double>> in{detail::spread_tensor({6, 3}, rng),
                                   detail::spread_tensor({3, 4}, rng),
                                   detail::spread_tensor({4}, rng),
                                   detail::spread_tensor({8, 2}, rng),
                                   detail::spread_tensor({2}, rng)};
    const std::vector<std::int32_t> labels{0, 1, 1, 0, 1, 0};
    auto r = grad_check(
        [labels](Graph<double>& g, const std::vector<Var<double>>& v) {
          auto feats = g.relu(g.linear(v[0], v[1], v[2]));
          auto pooled = g.max_pool_rows(feats).out;
          auto cat = g.concat_cols({feats, g.stack_rows(pooled, 6)});
          auto scores = g.linear(cat, v[3], v[4]);
          return g.softmax_cross_entropy(scores, labels);
        },
        in);
    record("mlp/pool/concat composite", r, 1e-6);
  }
  return out;
}

}  // namespace ptseg
