#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ptseg/tensor.hpp"

namespace ptseg {

/// Handle to a node on a Graph. Plain index; cheap to copy, stable across
/// graph growth and rewind (as long as the node itself survives).
template <class T>
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

/// Reverse-mode tape over dense tensors.
///
/// Nodes are appended in evaluation order, so the node list is always a
/// topological order of the expression DAG and one backward sweep from the
/// loss visits each node exactly once. Leaves created before mark()/rewind()
/// survive a rewind with their values and ids intact, which is how trainable
/// parameters persist across training steps while the op nodes of each step
/// are discarded.
template <class T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    Tensor<T> value;
    std::vector<T> grad;           // same length as value.data()
    std::vector<std::size_t> inputs;
    BackwardFn backward;           // empty for leaves
    bool requires_grad = false;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  // ---- node management ------------------------------------------------

  Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
    return push(std::move(value), {}, nullptr, requires_grad);
  }

  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  /// Low-level node constructor; also the extension point tests use to
  /// exercise the gradient checker with a deliberately wrong backward rule.
  Var<T> make_node(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn backward) {
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (auto v : inputs) ids.push_back(v.id);
    return push(std::move(value), std::move(ids), std::move(backward), false);
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t mark() const { return nodes_.size(); }

  /// Drops all nodes created after `mark`. Handles into dropped nodes become
  /// invalid; earlier handles (parameters, constants) keep working.
  void rewind(std::size_t mark) {
    if (mark > nodes_.size()) throw ArgError("rewind mark beyond graph size");
    nodes_.resize(mark);
  }

  const Tensor<T>& value(Var<T> v) const { return node(v).value; }
  Tensor<T>& value_mut(Var<T> v) { return node(v).value; }
  const std::vector<T>& grad(Var<T> v) const { return node(v).grad; }
  std::vector<T>& grad_mut(Var<T> v) { return node(v).grad; }
  bool requires_grad(Var<T> v) const { return node(v).requires_grad; }
  bool is_leaf(Var<T> v) const { return !node(v).backward; }

  void zero_grad() {
    for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), T(0));
  }

  /// Reverse sweep from a scalar loss. Op-node adjoints are reset first, so
  /// each call is an independent pass; leaf grads accumulate across calls.
  void backward(Var<T> loss) {
    Node& l = node(loss);
    if (l.value.numel() != 1)
      throw ArgError("backward requires a scalar loss, got shape " + shape_str(l.value.shape()));
    for (std::size_t i = 0; i <= loss.id; ++i) {
      Node& n = nodes_[i];
      if (n.backward) std::fill(n.grad.begin(), n.grad.end(), T(0));
    }
    l.grad[0] += T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward) n.backward(*this, i);
    }
  }

  // ---- operators -------------------------------------------------------

  /// out[i,j] = sum_k a[i,k] * b[k,j]
  Var<T> matmul(Var<T> a, Var<T> b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    require_rank(A, 2, "matmul lhs");
    require_rank(B, 2, "matmul rhs");
    if (A.cols() != B.rows())
      throw ShapeError("matmul inner extents differ: " + shape_str(A.shape()) + " x " +
                       shape_str(B.shape()));
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    Tensor<T> out(Shape{n, m});
    gemm_acc(A.data().data(), B.data().data(), out.data().data(), n, k, m);
    auto fn = [a, b, n, k, m](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      const auto& Av = g.value(a).data();
      const auto& Bv = g.value(b).data();
      auto& ga = g.node(a).grad;
      auto& gb = g.node(b).grad;
      // dA = dOut * B^T
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const T gij = go[i * m + j];
          if (gij == T(0)) continue;
          for (std::size_t kk = 0; kk < k; ++kk) ga[i * k + kk] += gij * Bv[kk * m + j];
        }
      // dB = A^T * dOut
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const T aik = Av[i * k + kk];
          if (aik == T(0)) continue;
          for (std::size_t j = 0; j < m; ++j) gb[kk * m + j] += aik * go[i * m + j];
        }
    };
    return make_node(std::move(out), {a, b}, std::move(fn));
  }

  /// Shared per-row dense layer: out = x * w + b (b broadcast over rows).
  Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
    const Tensor<T>& X = value(x);
    const Tensor<T>& W = value(w);
    const Tensor<T>& B = value(b);
    require_rank(X, 2, "linear input");
    require_rank(W, 2, "linear weight");
    if (B.rank() != 1 || B.extent(0) != W.cols())
      throw ShapeError("linear bias shape " + shape_str(B.shape()) + " does not match weight " +
                       shape_str(W.shape()));
    return add_rowvec(matmul(x, w), b);
  }

  /// x[N,D] + v[D], v broadcast to every row.
  Var<T> add_rowvec(Var<T> x, Var<T> v) {
    const Tensor<T>& X = value(x);
    const Tensor<T>& V = value(v);
    require_rank(X, 2, "add_rowvec input");
    if (V.rank() != 1 || V.extent(0) != X.cols())
      throw ShapeError("row vector shape " + shape_str(V.shape()) + " does not broadcast over " +
                       shape_str(X.shape()));
    const std::size_t n = X.rows(), d = X.cols();
    Tensor<T> out = X;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) out.at(i, j) += V[j];
    auto fn = [x, v, n, d](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      auto& gx = g.node(x).grad;
      auto& gv = g.node(v).grad;
      for (std::size_t i = 0; i < n * d; ++i) gx[i] += go[i];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gv[j] += go[i * d + j];
    };
    return make_node(std::move(out), {x, v}, std::move(fn));
  }

  Var<T> add(Var<T> a, Var<T> b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (!A.same_shape(B))
      throw ShapeError("add shapes differ: " + shape_str(A.shape()) + " vs " +
                       shape_str(B.shape()));
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
    auto fn = [a, b](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      auto& ga = g.node(a).grad;
      auto& gb = g.node(b).grad;
      for (std::size_t i = 0; i < go.size(); ++i) {
        ga[i] += go[i];
        gb[i] += go[i];
      }
    };
    return make_node(std::move(out), {a, b}, std::move(fn));
  }

  /// Elementwise (Hadamard) product.
  Var<T> mul(Var<T> a, Var<T> b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (!A.same_shape(B))
      throw ShapeError("mul shapes differ: " + shape_str(A.shape()) + " vs " +
                       shape_str(B.shape()));
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
    auto fn = [a, b](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      const auto& Av = g.value(a).data();
      const auto& Bv = g.value(b).data();
      auto& ga = g.node(a).grad;
      auto& gb = g.node(b).grad;
      for (std::size_t i = 0; i < go.size(); ++i) {
        ga[i] += go[i] * Bv[i];
        gb[i] += go[i] * Av[i];
      }
    };
    return make_node(std::move(out), {a, b}, std::move(fn));
  }

  Var<T> scale(Var<T> x, T c) {
    Tensor<T> out = value(x);
    for (auto& v : out.data()) v *= c;
    auto fn = [x, c](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      auto& gx = g.node(x).grad;
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += c * go[i];
    };
    return make_node(std::move(out), {x}, std::move(fn));
  }

  /// 1 - x elementwise (the gate complement in GRU cells).
  Var<T> one_minus(Var<T> x) {
    Tensor<T> out = value(x);
    for (auto& v : out.data()) v = T(1) - v;
    auto fn = [x](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      auto& gx = g.node(x).grad;
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] -= go[i];
    };
    return make_node(std::move(out), {x}, std::move(fn));
  }

  /// max(0,x); the subgradient at 0 is taken to be 0.
  Var<T> relu(Var<T> x) {
    Tensor<T> out = value(x);
    for (auto& v : out.data()) v = v > T(0) ? v : T(0);
    auto fn = [x](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      const auto& xv = g.value(x).data();
      auto& gx = g.node(x).grad;
      for (std::size_t i = 0; i < go.size(); ++i)
        if (xv[i] > T(0)) gx[i] += go[i];
    };
    return make_node(std::move(out), {x}, std::move(fn));
  }

  Var<T> sigmoid(Var<T> x) {
    Tensor<T> out = value(x);
    for (auto& v : out.data()) v = stable_sigmoid(v);
    auto fn = [x](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      const auto& ov = g.nodes_[self].value.data();
      auto& gx = g.node(x).grad;
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * ov[i] * (T(1) - ov[i]);
    };
    return make_node(std::move(out), {x}, std::move(fn));
  }

  Var<T> tanh_op(Var<T> x) {
    Tensor<T> out = value(x);
    for (auto& v : out.data()) v = std::tanh(v);
    auto fn = [x](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      const auto& ov = g.nodes_[self].value.data();
      auto& gx = g.node(x).grad;
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * (T(1) - ov[i] * ov[i]);
    };
    return make_node(std::move(out), {x}, std::move(fn));
  }

  struct PoolResult {
    Var<T> out;                        // shape [D]
    std::vector<std::size_t> argmax;   // winning row per column
  };

  /// Column-wise max over rows; ties go to the lowest row index so the
  /// backward routing is deterministic.
  PoolResult max_pool_rows(Var<T> x) {
    const Tensor<T>& X = value(x);
    require_rank(X, 2, "max_pool_rows input");
    const std::size_t n = X.rows(), d = X.cols();
    Tensor<T> out(Shape{d});
    std::vector<std::size_t> argmax(d, 0);
    for (std::size_t j = 0; j < d; ++j) {
      T best = X.at(0, j);
      std::size_t row = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (X.at(i, j) > best) {
          best = X.at(i, j);
          row = i;
        }
      }
      out[j] = best;
      argmax[j] = row;
    }
    auto fn = [x, argmax, d](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      auto& gx = g.node(x).grad;
      for (std::size_t j = 0; j < d; ++j) gx[argmax[j] * d + j] += go[j];
    };
    Var<T> v = make_node(std::move(out), {x}, std::move(fn));
    return PoolResult{v, std::move(argmax)};
  }

  /// Repeats a vector (shape [D] or [1,D]) as n identical rows.
  Var<T> stack_rows(Var<T> g, std::size_t n) {
    if (n < 1) throw ArgError("stack_rows needs n >= 1");
    const Tensor<T>& G = value(g);
    std::size_t d;
    if (G.rank() == 1)
      d = G.extent(0);
    else if (G.rank() == 2 && G.rows() == 1)
      d = G.cols();
    else
      throw ShapeError("stack_rows expects [D] or [1,D], got " + shape_str(G.shape()));
    Tensor<T> out(Shape{n, d});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) out.at(i, j) = G[j];
    auto fn = [g, n, d](Graph& gr, std::size_t self) {
      const auto& go = gr.nodes_[self].grad;
      auto& gg = gr.node(g).grad;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gg[j] += go[i * d + j];
    };
    return make_node(std::move(out), {g}, std::move(fn));
  }

  /// Column-wise concatenation of matrices sharing a row count.
  Var<T> concat_cols(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ArgError("concat_cols needs at least one input");
    const std::size_t n = value(xs[0]).rows();
    std::size_t total = 0;
    for (auto v : xs) {
      const Tensor<T>& X = value(v);
      require_rank(X, 2, "concat_cols input");
      if (X.rows() != n)
        throw ShapeError("concat_cols row counts differ: " + shape_str(value(xs[0]).shape()) +
                         " vs " + shape_str(X.shape()));
      total += X.cols();
    }
    Tensor<T> out(Shape{n, total});
    std::size_t off = 0;
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> widths;
    for (auto v : xs) {
      const Tensor<T>& X = value(v);
      const std::size_t d = X.cols();
      offsets.push_back(off);
      widths.push_back(d);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.at(i, off + j) = X.at(i, j);
      off += d;
    }
    auto xs_copy = xs;
    auto fn = [xs_copy, offsets, widths, n, total](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      for (std::size_t k = 0; k < xs_copy.size(); ++k) {
        auto& gx = g.node(xs_copy[k]).grad;
        const std::size_t d = widths[k], off = offsets[k];
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += go[i * total + off + j];
      }
    };
    return make_node(std::move(out), xs, std::move(fn));
  }

  /// Mean over rows of -log softmax(logits)[i, labels[i]], stabilized by
  /// row-max subtraction.
  Var<T> softmax_cross_entropy(Var<T> logits, const std::vector<std::int32_t>& labels) {
    const Tensor<T>& L = value(logits);
    require_rank(L, 2, "softmax_cross_entropy logits");
    const std::size_t n = L.rows(), m = L.cols();
    if (labels.size() != n)
      throw ShapeError("label count " + std::to_string(labels.size()) + " != row count " +
                       std::to_string(n));
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= m)
        throw DataError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                        " outside [0," + std::to_string(m) + ")");
    Tensor<T> probs(Shape{n, m});
    T loss = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      T mx = L.at(i, 0);
      for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, L.at(i, j));
      T denom = T(0);
      for (std::size_t j = 0; j < m; ++j) {
        const T e = std::exp(L.at(i, j) - mx);
        probs.at(i, j) = e;
        denom += e;
      }
      for (std::size_t j = 0; j < m; ++j) probs.at(i, j) /= denom;
      // -log p = log(denom) - (logit - mx); denom >= 1 so the log is safe
      loss += std::log(denom) - (L.at(i, static_cast<std::size_t>(labels[i])) - mx);
    }
    loss /= static_cast<T>(n);
    auto fn = [logits, probs, labels, n, m](Graph& g, std::size_t self) {
      const T up = g.nodes_[self].grad[0];
      auto& gl = g.node(logits).grad;
      const T inv_n = T(1) / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          T d = probs.at(i, j);
          if (static_cast<std::size_t>(labels[i]) == j) d -= T(1);
          gl[i * m + j] += up * d * inv_n;
        }
    };
    return make_node(Tensor<T>::scalar(loss), {logits}, std::move(fn));
  }

  /// Sum of all elements, as a scalar.
  Var<T> sum(Var<T> x) {
    const Tensor<T>& X = value(x);
    T s = T(0);
    for (const T& v : X.data()) s += v;
    auto fn = [x](Graph& g, std::size_t self) {
      const T up = g.nodes_[self].grad[0];
      auto& gx = g.node(x).grad;
      for (auto& v : gx) v += up;
    };
    return make_node(Tensor<T>::scalar(s), {x}, std::move(fn));
  }

  /// Same data, new shape (element count must match).
  Var<T> reshape(Var<T> x, Shape shape) {
    const Tensor<T>& X = value(x);
    if (shape_numel(shape) != X.numel())
      throw ShapeError("reshape " + shape_str(X.shape()) + " -> " + shape_str(shape) +
                       " changes element count");
    Tensor<T> out(std::move(shape), X.data());
    auto fn = [x](Graph& g, std::size_t self) {
      const auto& go = g.nodes_[self].grad;
      auto& gx = g.node(x).grad;
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    };
    return make_node(std::move(out), {x}, std::move(fn));
  }

 private:
  Node& node(Var<T> v) { return nodes_.at(v.id); }
  const Node& node(Var<T> v) const { return nodes_.at(v.id); }

  Var<T> push(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn fn, bool rg) {
    Node n;
    n.grad.assign(value.numel(), T(0));
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
    n.requires_grad = rg;
    nodes_.push_back(std::move(n));
    return Var<T>{nodes_.size() - 1};
  }

  static void require_rank(const Tensor<T>& t, std::size_t r, const char* what) {
    if (t.rank() != r)
      throw ShapeError(std::string(what) + " must have rank " + std::to_string(r) + ", got " +
                       shape_str(t.shape()));
  }

  static T stable_sigmoid(T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  }

  // Row-major C += A*B with the k loop hoisted for locality.
  static void gemm_acc(const T* a, const T* b, T* c, std::size_t n, std::size_t k,
                       std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
      T* crow = c + i * m;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T aik = a[i * k + kk];
        if (aik == T(0)) continue;
        const T* brow = b + kk * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
      }
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace ptseg
