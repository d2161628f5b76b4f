#pragma once

#include <string>
#include <vector>

#include "ptseg/gru.hpp"
#include "ptseg/init.hpp"
#include "ptseg/params.hpp"

namespace ptseg {

enum class Variant { baseline, ms_cu, g_rcu };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::ms_cu: return "ms_cu";
    default: return "g_rcu";
  }
}

inline Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::baseline;
  if (s == "ms_cu") return Variant::ms_cu;
  if (s == "g_rcu") return Variant::g_rcu;
  throw ArgError("unknown variant '" + s + "' (expected baseline|ms_cu|g_rcu)");
}

struct ModelConfig {
  std::size_t input_dim = 9;    // 6 without color, 9 with
  std::size_t num_classes = 2;
  std::vector<std::size_t> point_mlp_widths{64, 64, 128};
  std::size_t block_feature_dim = 256;  // D', the pooled per-block feature
  std::vector<std::size_t> cu_widths{256};
  std::size_t cu_count = 2;     // consolidation units (ms_cu default; 0-1 for baseline)
  std::size_t rcu_hidden = 64;
  std::vector<std::size_t> head_widths{256, 128};
  Variant variant = Variant::baseline;
  std::size_t scale_count = 3;  // multi-scale group size; must match radii count
  std::size_t group_size = 4;   // grid group size (2x2)

  void validate() const {
    if (input_dim != 6 && input_dim != 9) throw ArgError("input_dim must be 6 or 9");
    if (num_classes < 2) throw ArgError("num_classes must be >= 2");
    if (point_mlp_widths.empty() || head_widths.empty())
      throw ArgError("mlp width lists must not be empty");
    if (block_feature_dim < 1) throw ArgError("block_feature_dim must be >= 1");
    if (cu_count > 0 && cu_widths.empty()) throw ArgError("cu_widths must not be empty");
    if (variant == Variant::g_rcu && group_size != 4)
      throw ArgError("grid variant expects 2x2 groups of 4 blocks");
    if (variant == Variant::g_rcu && cu_count > 0)
      throw ArgError("consolidation units are not wired into the grid variant");
    if (variant == Variant::ms_cu && scale_count < 2)
      throw ArgError("multi-scale variant needs at least 2 scales");
  }

  /// Middle scale: the one whose window matches the single-scale block.
  std::size_t middle_scale() const { return (scale_count - 1) / 2; }

  std::size_t cu_output_dim() const { return 2 * cu_widths.back(); }

  /// Input width of the scoring head, per variant wiring.
  std::size_t head_input_dim() const {
    const std::size_t dp = block_feature_dim;
    switch (variant) {
      case Variant::baseline:
        return cu_count > 0 ? cu_output_dim() : 2 * dp;
      case Variant::ms_cu:
        return cu_count > 0 ? cu_output_dim() : dp + scale_count * dp;
      default:
        return 2 * dp + rcu_hidden;
    }
  }
};

inline ModelConfig default_config(Variant v) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.cu_count = v == Variant::ms_cu ? 2 : 0;
  return cfg;
}

// ---- parameter layout -------------------------------------------------------

struct ParamSpecEntry {
  std::string name;
  Shape shape;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  bool is_weight = false;  // weights get glorot init, biases zeros
};

namespace model_detail {

inline void mlp_spec(std::vector<ParamSpecEntry>& out, const std::string& prefix, std::size_t in,
                     const std::vector<std::size_t>& widths) {
  std::size_t cur = in;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t w = widths[l];
    out.push_back({prefix + "." + std::to_string(l) + ".w", Shape{cur, w}, cur, w, true});
    out.push_back({prefix + "." + std::to_string(l) + ".b", Shape{w}, cur, w, false});
    cur = w;
  }
}

inline std::vector<std::size_t> with_tail(std::vector<std::size_t> widths, std::size_t tail) {
  widths.push_back(tail);
  return widths;
}

}  // namespace model_detail

/// Names and shapes of every trainable tensor of a variant, in checkpoint
/// order. Everything else (init, counting, binding) derives from this.
inline std::vector<ParamSpecEntry> param_spec(const ModelConfig& cfg) {
  using model_detail::mlp_spec;
  using model_detail::with_tail;
  cfg.validate();
  std::vector<ParamSpecEntry> out;
  const std::size_t dp = cfg.block_feature_dim;
  const auto descriptor_widths = with_tail(cfg.point_mlp_widths, dp);

  switch (cfg.variant) {
    case Variant::baseline: {
      mlp_spec(out, "point_mlp", cfg.input_dim, descriptor_widths);
      std::size_t cur = 2 * dp;
      for (std::size_t i = 0; i < cfg.cu_count; ++i) {
        mlp_spec(out, "cu" + std::to_string(i) + ".mlp", cur, cfg.cu_widths);
        cur = cfg.cu_output_dim();
      }
      break;
    }
    case Variant::ms_cu: {
      for (std::size_t s = 0; s < cfg.scale_count; ++s)
        mlp_spec(out, "scale" + std::to_string(s) + ".point_mlp", cfg.input_dim,
                 descriptor_widths);
      std::size_t cur = dp + cfg.scale_count * dp;
      for (std::size_t i = 0; i < cfg.cu_count; ++i) {
        mlp_spec(out, "cu" + std::to_string(i) + ".mlp", cur, cfg.cu_widths);
        cur = cfg.cu_output_dim();
      }
      break;
    }
    case Variant::g_rcu: {
      mlp_spec(out, "point_mlp", cfg.input_dim, descriptor_widths);
      const std::size_t h = cfg.rcu_hidden;
      for (const char* gate : {"z", "r", "h"}) {
        out.push_back({std::string("gru.w") + gate, Shape{h, dp}, dp, h, true});
      }
      for (const char* gate : {"z", "r", "h"}) {
        out.push_back({std::string("gru.u") + gate, Shape{h, h}, h, h, true});
      }
      for (const char* gate : {"z", "r", "h"}) {
        out.push_back({std::string("gru.b") + gate, Shape{h}, dp, h, false});
      }
      break;
    }
  }
  mlp_spec(out, "head", cfg.head_input_dim(), with_tail(cfg.head_widths, cfg.num_classes));
  return out;
}

inline std::size_t param_count(const ModelConfig& cfg) {
  std::size_t total = 0;
  for (const auto& e : param_spec(cfg)) total += shape_numel(e.shape);
  return total;
}

/// Creates all leaves for a variant: glorot-uniform weights, zero biases,
/// drawn in spec order from the seeded generator.
template <class T>
ParamStore<T> init_params(Graph<T>& g, const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore<T> store;
  for (const auto& e : param_spec(cfg)) {
    Tensor<T> t = e.is_weight ? glorot_uniform<T>(e.shape, e.fan_in, e.fan_out, rng)
                              : Tensor<T>(e.shape);
    store.add(e.name, g.leaf(std::move(t), true));
  }
  return store;
}

template <class T>
GruParams<T> gru_from_store(const ParamStore<T>& store) {
  GruParams<T> p;
  p.wz = store.at("gru.wz");
  p.wr = store.at("gru.wr");
  p.wh = store.at("gru.wh");
  p.uz = store.at("gru.uz");
  p.ur = store.at("gru.ur");
  p.uh = store.at("gru.uh");
  p.bz = store.at("gru.bz");
  p.br = store.at("gru.br");
  p.bh = store.at("gru.bh");
  return p;
}

// ---- forward passes ---------------------------------------------------------

namespace model_detail {

/// Applies the named MLP chain; ReLU after every layer except optionally the
/// last (score layers stay linear).
template <class T>
Var<T> apply_mlp(Graph<T>& g, Var<T> x, const ParamStore<T>& store, const std::string& prefix,
                 std::size_t layers, bool relu_last) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    x = g.linear(x, store.at(base + ".w"), store.at(base + ".b"));
    if (relu_last || l + 1 < layers) x = g.relu(x);
  }
  return x;
}

}  // namespace model_detail

template <class T>
struct DescriptorOut {
  Var<T> point_feats;  // [N, D']
  Var<T> block_feat;   // [D']
};

/// Shared per-point MLP stack followed by max pooling: the per-block feature
/// encoder every variant builds on.
template <class T>
DescriptorOut<T> block_descriptor(Graph<T>& g, Var<T> points, const ParamStore<T>& store,
                                  const std::string& prefix, const ModelConfig& cfg) {
  const std::size_t layers = cfg.point_mlp_widths.size() + 1;  // widths + D' projection
  Var<T> feats = model_detail::apply_mlp(g, points, store, prefix, layers, true);
  Var<T> pooled = g.max_pool_rows(feats).out;
  return {feats, pooled};
}

/// MLP to a higher dimension, pool into one shared vector, stack it back
/// onto every row: output is [N, 2F'] and chains into the next unit.
template <class T>
Var<T> consolidation_unit(Graph<T>& g, Var<T> feats, const ParamStore<T>& store,
                          const std::string& prefix, const ModelConfig& cfg) {
  Var<T> h = model_detail::apply_mlp(g, feats, store, prefix + ".mlp", cfg.cu_widths.size(), true);
  Var<T> pooled = g.max_pool_rows(h).out;
  const std::size_t n = g.value(h).rows();
  return g.concat_cols({h, g.stack_rows(pooled, n)});
}

template <class T>
Var<T> apply_head(Graph<T>& g, Var<T> x, const ParamStore<T>& store, const ModelConfig& cfg) {
  return model_detail::apply_mlp(g, x, store, "head", cfg.head_widths.size() + 1, false);
}

/// Single-block segmentation: local point features concatenated with the
/// stacked block feature, then scored per point. With cu_count > 0 the
/// concatenated features pass through that many consolidation units first.
template <class T>
Var<T> pointnet_forward(Graph<T>& g, Var<T> points, const ParamStore<T>& store,
                        const ModelConfig& cfg) {
  auto desc = block_descriptor(g, points, store, "point_mlp", cfg);
  const std::size_t n = g.value(points).rows();
  Var<T> x = g.concat_cols({desc.point_feats, g.stack_rows(desc.block_feat, n)});
  for (std::size_t i = 0; i < cfg.cu_count; ++i)
    x = consolidation_unit(g, x, store, "cu" + std::to_string(i), cfg);
  return apply_head(g, x, store, cfg);
}

/// Unsynchronized many-to-many recurrent consolidation: the GRU first reads
/// all B block features, then emits B updated features while consuming zero
/// vectors, so every output has seen the whole input sequence.
template <class T>
std::vector<Var<T>> rcu_forward(Graph<T>& g, const std::vector<Var<T>>& block_feats,
                                const GruParams<T>& gru) {
  if (block_feats.empty()) throw ArgError("rcu needs at least one block feature");
  const std::size_t din = gru.input_dim(g);
  const std::size_t hd = gru.hidden_dim(g);
  for (auto f : block_feats) {
    const Tensor<T>& t = g.value(f);
    if (t.rank() != 1 || t.extent(0) != din)
      throw ShapeError("rcu block feature shape " + shape_str(t.shape()) + ", expected [" +
                       std::to_string(din) + "]");
  }
  Var<T> h = g.constant(Tensor<T>(Shape{hd}));
  for (auto f : block_feats) h = gru_step(g, f, h, gru);
  Var<T> zero_in = g.constant(Tensor<T>(Shape{din}));
  std::vector<Var<T>> out;
  out.reserve(block_feats.size());
  for (std::size_t i = 0; i < block_feats.size(); ++i) {
    h = gru_step(g, zero_in, h, gru);
    out.push_back(h);
  }
  return out;
}

/// Multi-scale forward: scale-specific descriptors (unshared weights), block
/// features concatenated into one multi-scale feature and stacked onto the
/// middle scale's point features, consolidation units, then the head.
/// Scores are for the middle-scale block's points.
template <class T>
Var<T> ms_cu_forward(Graph<T>& g, const std::vector<Var<T>>& scale_points,
                     const ParamStore<T>& store, const ModelConfig& cfg) {
  if (scale_points.size() != cfg.scale_count)
    throw ShapeError("expected " + std::to_string(cfg.scale_count) + " scales, got " +
                     std::to_string(scale_points.size()));
  std::vector<Var<T>> block_feat_rows;
  Var<T> mid_feats{};
  for (std::size_t s = 0; s < cfg.scale_count; ++s) {
    auto desc = block_descriptor(g, scale_points[s], store,
                                 "scale" + std::to_string(s) + ".point_mlp", cfg);
    block_feat_rows.push_back(g.reshape(desc.block_feat, Shape{1, cfg.block_feature_dim}));
    if (s == cfg.middle_scale()) mid_feats = desc.point_feats;
  }
  Var<T> ms_feat = g.concat_cols(block_feat_rows);  // [1, S*D']
  const std::size_t n = g.value(mid_feats).rows();
  Var<T> x = g.concat_cols({mid_feats, g.stack_rows(ms_feat, n)});
  for (std::size_t i = 0; i < cfg.cu_count; ++i)
    x = consolidation_unit(g, x, store, "cu" + std::to_string(i), cfg);
  return apply_head(g, x, store, cfg);
}

/// Grid forward: one shared descriptor over the four blocks, an RCU pass
/// over their block features, then per block the point features are joined
/// with the original and the updated block feature and scored by the shared
/// head. Returns one score matrix per block, in group order.
template <class T>
std::vector<Var<T>> g_rcu_forward(Graph<T>& g, const std::vector<Var<T>>& block_points,
                                  const ParamStore<T>& store, const ModelConfig& cfg) {
  if (block_points.size() != cfg.group_size)
    throw ShapeError("expected " + std::to_string(cfg.group_size) + " blocks, got " +
                     std::to_string(block_points.size()));
  std::vector<DescriptorOut<T>> descs;
  std::vector<Var<T>> block_feats;
  for (auto pts : block_points) {
    descs.push_back(block_descriptor(g, pts, store, "point_mlp", cfg));
    block_feats.push_back(descs.back().block_feat);
  }
  auto updated = rcu_forward(g, block_feats, gru_from_store(store));
  std::vector<Var<T>> scores;
  for (std::size_t b = 0; b < block_points.size(); ++b) {
    const std::size_t n = g.value(block_points[b]).rows();
    Var<T> x = g.concat_cols(
        {descs[b].point_feats, g.stack_rows(block_feats[b], n), g.stack_rows(updated[b], n)});
    scores.push_back(apply_head(g, x, store, cfg));
  }
  return scores;
}

}  // namespace ptseg
