#pragma once

#include <map>
#include <string>
#include <vector>

#include "ptseg/graph.hpp"
#include "ptseg/io.hpp"

namespace ptseg {

/// Ordered, uniquely named collection of trainable graph leaves. The order
/// is the checkpoint serialization order and the optimizer binding order.
template <class T>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Var<T>> vars;

  Var<T> add(const std::string& name, Var<T> v) {
    for (const auto& n : names)
      if (n == name) throw ArgError("duplicate parameter name: " + name);
    names.push_back(name);
    vars.push_back(v);
    return v;
  }

  Var<T> at(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return vars[i];
    throw ArgError("unknown parameter: " + name);
  }

  bool contains(const std::string& name) const {
    for (const auto& n : names)
      if (n == name) return true;
    return false;
  }

  std::size_t count() const { return vars.size(); }

  std::size_t scalar_count(const Graph<T>& g) const {
    std::size_t total = 0;
    for (auto v : vars) total += g.value(v).numel();
    return total;
  }
};

// Checkpoint container: magic "PTSG", u32 version, u32 tensor count, then per
// tensor: u16 name length + UTF-8 name, u8 rank, u32 extents, payload as
// little-endian f32. Bit-exact round-trip for 32-bit graphs.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void serialize_params(ByteWriter& w, const Graph<T>& g, const ParamStore<T>& store) {
  w.str("PTSG");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(store.count()));
  for (std::size_t i = 0; i < store.count(); ++i) {
    const std::string& name = store.names[i];
    const Tensor<T>& t = g.value(store.vars[i]);
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.str(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (const T& v : t.data()) w.f32(static_cast<float>(v));
  }
}

template <class T>
void save_checkpoint(const std::string& path, const Graph<T>& g, const ParamStore<T>& store) {
  ByteWriter w;
  serialize_params(w, g, store);
  w.save(path);
}

/// Reads named tensors from a checkpoint stream.
template <class T>
std::vector<std::pair<std::string, Tensor<T>>> read_checkpoint_tensors(ByteReader& r) {
  if (r.str(4) != "PTSG") throw FormatError("bad checkpoint magic (expected PTSG)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  std::vector<std::pair<std::string, Tensor<T>>> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    for (auto& e : shape) e = r.u32();
    Tensor<T> t(shape);
    for (auto& v : t.data()) v = static_cast<T>(r.f32());
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

/// Loads values into an existing store; every stored name must be present
/// with a matching shape, and the file must not carry extras.
template <class T>
void load_checkpoint(const std::string& path, Graph<T>& g, ParamStore<T>& store) {
  ByteReader r = ByteReader::from_file(path);
  auto tensors = read_checkpoint_tensors<T>(r);
  if (tensors.size() != store.count())
    throw DataError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model needs " +
                    std::to_string(store.count()));
  for (auto& [name, tensor] : tensors) {
    if (!store.contains(name)) throw DataError("checkpoint tensor not in model: " + name);
    Var<T> v = store.at(name);
    if (g.value(v).shape() != tensor.shape())
      throw ShapeError("checkpoint tensor " + name + " has shape " + shape_str(tensor.shape()) +
                       ", model expects " + shape_str(g.value(v).shape()));
    g.value_mut(v) = std::move(tensor);
  }
}

}  // namespace ptseg
