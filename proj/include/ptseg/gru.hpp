#pragma once

#include <string>

#include "ptseg/graph.hpp"

namespace ptseg {

/// Gated recurrent unit parameters. Input-to-hidden matrices are
/// [hidden, input], hidden-to-hidden are [hidden, hidden], biases [hidden].
template <class T>
struct GruParams {
  Var<T> wz, wr, wh;
  Var<T> uz, ur, uh;
  Var<T> bz, br, bh;

  std::size_t input_dim(const Graph<T>& g) const { return g.value(wz).cols(); }
  std::size_t hidden_dim(const Graph<T>& g) const { return g.value(wz).rows(); }

  void check(const Graph<T>& g) const {
    const std::size_t h = hidden_dim(g), d = input_dim(g);
    auto expect = [&](Var<T> v, std::size_t r, std::size_t c, const char* name) {
      const Tensor<T>& t = g.value(v);
      if (t.rank() != 2 || t.rows() != r || t.cols() != c)
        throw ShapeError(std::string("gru ") + name + " has shape " + shape_str(t.shape()) +
                         ", expected [" + std::to_string(r) + "," + std::to_string(c) + "]");
    };
    auto expect_vec = [&](Var<T> v, std::size_t n, const char* name) {
      const Tensor<T>& t = g.value(v);
      if (t.rank() != 1 || t.extent(0) != n)
        throw ShapeError(std::string("gru ") + name + " has shape " + shape_str(t.shape()) +
                         ", expected [" + std::to_string(n) + "]");
    };
    expect(wr, h, d, "wr");
    expect(wh, h, d, "wh");
    expect(uz, h, h, "uz");
    expect(ur, h, h, "ur");
    expect(uh, h, h, "uh");
    expect_vec(bz, h, "bz");
    expect_vec(br, h, "br");
    expect_vec(bh, h, "bh");
  }
};

/// One GRU cell update:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   cand = tanh(Wh x + Uh (r . h) + bh)
///   h' = (1 - z) . h + z . cand
/// The update gate gates the candidate (one of the two sign conventions in
/// circulation; fixed here for reproducibility). x has shape [input_dim],
/// h and the result [hidden_dim]. Differentiable end to end.
template <class T>
Var<T> gru_step(Graph<T>& g, Var<T> x, Var<T> h, const GruParams<T>& p) {
  p.check(g);
  const std::size_t din = p.input_dim(g);
  const std::size_t hd = p.hidden_dim(g);
  const Tensor<T>& xv = g.value(x);
  const Tensor<T>& hv = g.value(h);
  if (xv.rank() != 1 || xv.extent(0) != din)
    throw ShapeError("gru input shape " + shape_str(xv.shape()) + ", expected [" +
                     std::to_string(din) + "]");
  if (hv.rank() != 1 || hv.extent(0) != hd)
    throw ShapeError("gru state shape " + shape_str(hv.shape()) + ", expected [" +
                     std::to_string(hd) + "]");

  Var<T> xc = g.reshape(x, Shape{din, 1});
  Var<T> hc = g.reshape(h, Shape{hd, 1});
  auto gate = [&](Var<T> w, Var<T> u, Var<T> b, Var<T> state_col) {
    Var<T> pre = g.add(g.matmul(w, xc), g.matmul(u, state_col));
    return g.add(pre, g.reshape(b, Shape{hd, 1}));
  };
  Var<T> z = g.sigmoid(gate(p.wz, p.uz, p.bz, hc));
  Var<T> r = g.sigmoid(gate(p.wr, p.ur, p.br, hc));
  Var<T> cand = g.tanh_op(gate(p.wh, p.uh, p.bh, g.mul(r, hc)));
  Var<T> next = g.add(g.mul(g.one_minus(z), hc), g.mul(z, cand));
  return g.reshape(next, Shape{hd});
}

}  // namespace ptseg
