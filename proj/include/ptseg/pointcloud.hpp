#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ptseg/io.hpp"
#include "ptseg/tensor.hpp"

namespace ptseg {

/// A labeled scene ("room"): point positions in meters, optional colors,
/// one class label per point. Colors are stored as 8-bit channels, matching
/// both file formats exactly; [0,1] floats appear only in assembled feature
/// matrices. Immutable by convention once built.
struct LabeledPointCloud {
  std::vector<std::array<float, 3>> positions;
  std::vector<std::array<std::uint8_t, 3>> colors;  // empty when absent
  std::vector<std::uint16_t> labels;
  std::vector<std::string> class_names;
  std::array<float, 3> bounds_min{0, 0, 0};
  std::array<float, 3> bounds_max{0, 0, 0};

  std::size_t size() const { return positions.size(); }
  bool has_colors() const { return !colors.empty(); }
  std::uint16_t num_classes() const { return static_cast<std::uint16_t>(class_names.size()); }

  void recompute_bounds() {
    if (positions.empty()) {
      bounds_min = bounds_max = {0, 0, 0};
      return;
    }
    bounds_min = bounds_max = positions[0];
    for (const auto& p : positions)
      for (int a = 0; a < 3; ++a) {
        bounds_min[a] = std::min(bounds_min[a], p[a]);
        bounds_max[a] = std::max(bounds_max[a], p[a]);
      }
  }

  void validate() const {
    if (!labels.empty() && labels.size() != positions.size())
      throw DataError("label count " + std::to_string(labels.size()) + " != point count " +
                      std::to_string(positions.size()));
    if (has_colors() && colors.size() != positions.size())
      throw DataError("color count " + std::to_string(colors.size()) + " != point count " +
                      std::to_string(positions.size()));
    const std::uint16_t m = num_classes();
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] >= m)
        throw DataError("label " + std::to_string(labels[i]) + " at point " + std::to_string(i) +
                        " >= class count " + std::to_string(m));
    for (const auto& p : positions)
      for (int a = 0; a < 3; ++a)
        if (!std::isfinite(p[a])) throw DataError("non-finite position component");
  }
};

enum class CloudFormat { binary, ascii };

// ---- binary format ------------------------------------------------------
// magic "PCSG", u32 version=1, u32 N, u8 has_color, u16 M,
// M x (u16 length + UTF-8 class name),
// per point: 3 x f32 position, optional 3 x u8 color, u16 label.
// Little-endian throughout.

inline constexpr std::uint32_t kCloudVersion = 1;

inline void serialize_cloud(ByteWriter& w, const LabeledPointCloud& c) {
  w.str("PCSG");
  w.u32(kCloudVersion);
  w.u32(static_cast<std::uint32_t>(c.size()));
  w.u8(c.has_colors() ? 1 : 0);
  w.u16(c.num_classes());
  for (const auto& name : c.class_names) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.str(name);
  }
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (int a = 0; a < 3; ++a) w.f32(c.positions[i][a]);
    if (c.has_colors())
      for (int a = 0; a < 3; ++a) w.u8(c.colors[i][a]);
    w.u16(c.labels[i]);
  }
}

/// Canonical byte serialization; also the basis of the content digest used
/// to pair prediction files with their source clouds.
inline std::vector<std::uint8_t> cloud_bytes(const LabeledPointCloud& c) {
  ByteWriter w;
  serialize_cloud(w, c);
  return w.buffer();
}

inline std::uint64_t cloud_digest(const LabeledPointCloud& c) { return fnv1a64(cloud_bytes(c)); }

inline LabeledPointCloud parse_cloud_binary(ByteReader& r) {
  if (r.str(4) != "PCSG") throw FormatError("bad cloud magic (expected PCSG)");
  const std::uint32_t version = r.u32();
  if (version != kCloudVersion)
    throw FormatError("unsupported cloud version " + std::to_string(version));
  const std::uint32_t n = r.u32();
  const bool has_color = r.u8() != 0;
  const std::uint16_t m = r.u16();
  LabeledPointCloud c;
  c.class_names.resize(m);
  for (auto& name : c.class_names) name = r.str(r.u16());
  c.positions.resize(n);
  c.labels.resize(n);
  if (has_color) c.colors.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) c.positions[i][a] = r.f32();
    if (has_color)
      for (int a = 0; a < 3; ++a) c.colors[i][a] = r.u8();
    const std::uint16_t label = r.u16();
    if (label >= m)
      throw DataError("label " + std::to_string(label) + " at point " + std::to_string(i) +
                      " >= class count " + std::to_string(m));
    c.labels[i] = label;
  }
  c.recompute_bounds();
  return c;
}

// ---- ascii format --------------------------------------------------------
// header "pcsg-ascii M=<m> color=<0|1>", then one point per line:
// "x y z [r g b] label" with colors as 0-255 integers. Floats are printed
// shortest-round-trip so parsing restores them bit for bit.

namespace detail {

inline std::string float_str(float v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline float parse_float(std::string_view tok, std::size_t line_no) {
  float v{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw FormatError("line " + std::to_string(line_no) + ": bad float '" + std::string(tok) + "'");
  return v;
}

inline long parse_int(std::string_view tok, std::size_t line_no) {
  long v{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw FormatError("line " + std::to_string(line_no) + ": bad integer '" + std::string(tok) +
                      "'");
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

inline std::string cloud_to_ascii(const LabeledPointCloud& c) {
  std::ostringstream os;
  os << "pcsg-ascii M=" << c.num_classes() << " color=" << (c.has_colors() ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < c.size(); ++i) {
    os << detail::float_str(c.positions[i][0]) << ' ' << detail::float_str(c.positions[i][1])
       << ' ' << detail::float_str(c.positions[i][2]);
    if (c.has_colors())
      os << ' ' << int(c.colors[i][0]) << ' ' << int(c.colors[i][1]) << ' '
         << int(c.colors[i][2]);
    os << ' ' << c.labels[i] << '\n';
  }
  return os.str();
}

inline LabeledPointCloud cloud_from_ascii(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty ascii cloud");
  auto head = detail::split_ws(line);
  if (head.size() != 3 || head[0] != "pcsg-ascii" || head[1].substr(0, 2) != "M=" ||
      head[2].substr(0, 6) != "color=")
    throw FormatError("bad ascii cloud header: '" + line + "'");
  const long m = detail::parse_int(head[1].substr(2), 1);
  const long has_color = detail::parse_int(head[2].substr(6), 1);
  if (m < 1 || m > 65535) throw FormatError("class count out of range: " + std::to_string(m));
  LabeledPointCloud c;
  for (long k = 0; k < m; ++k) c.class_names.push_back("class_" + std::to_string(k));
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    const std::size_t expected = has_color ? 7 : 4;
    if (toks.size() != expected)
      throw FormatError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(expected) + " fields, got " + std::to_string(toks.size()));
    std::array<float, 3> p;
    for (int a = 0; a < 3; ++a) p[a] = detail::parse_float(toks[a], line_no);
    c.positions.push_back(p);
    std::size_t next = 3;
    if (has_color) {
      std::array<std::uint8_t, 3> col;
      for (int a = 0; a < 3; ++a) {
        const long v = detail::parse_int(toks[next++], line_no);
        if (v < 0 || v > 255)
          throw FormatError("line " + std::to_string(line_no) + ": color channel " +
                            std::to_string(v) + " outside 0-255");
        col[a] = static_cast<std::uint8_t>(v);
      }
      c.colors.push_back(col);
    }
    const long label = detail::parse_int(toks[next], line_no);
    if (label < 0 || label >= m)
      throw DataError("line " + std::to_string(line_no) + ": label " + std::to_string(label) +
                      " >= class count " + std::to_string(m));
    c.labels.push_back(static_cast<std::uint16_t>(label));
  }
  c.recompute_bounds();
  return c;
}

inline void save_cloud(const std::string& path, const LabeledPointCloud& c, CloudFormat fmt) {
  if (fmt == CloudFormat::binary) {
    ByteWriter w;
    serialize_cloud(w, c);
    w.save(path);
  } else {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path);
    f << cloud_to_ascii(c);
    if (!f) throw FormatError("write failed: " + path);
  }
}

inline LabeledPointCloud load_cloud(const std::string& path, CloudFormat fmt) {
  if (fmt == CloudFormat::binary) {
    ByteReader r = ByteReader::from_file(path);
    return parse_cloud_binary(r);
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return cloud_from_ascii(text);
}

/// Sniffs the format from the first bytes.
inline LabeledPointCloud load_cloud_auto(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open: " + path);
  char head[4] = {0, 0, 0, 0};
  f.read(head, 4);
  f.close();
  const bool binary = std::string(head, 4) == "PCSG";
  return load_cloud(path, binary ? CloudFormat::binary : CloudFormat::ascii);
}

// ---- feature assembly -----------------------------------------------------

/// Builds the per-point input features: [X,Y,Z,R,G,B,X',Y',Z'] (9 columns)
/// or [X,Y,Z,X',Y',Z'] (6 columns without color). X,Y,Z are the raw
/// positions here; the block samplers later shift XY into block-local
/// coordinates. X',Y',Z' normalize each axis to [0,1] over the whole cloud;
/// an axis with zero extent maps to 0.5.
template <class T>
Tensor<T> assemble_features(const LabeledPointCloud& c, bool use_color) {
  if (use_color && !c.has_colors()) throw ArgError("cloud has no colors but use_color is set");
  const std::size_t n = c.size();
  const std::size_t d = use_color ? 9 : 6;
  Tensor<T> out(Shape{n, d});
  std::array<double, 3> lo{c.bounds_min[0], c.bounds_min[1], c.bounds_min[2]};
  std::array<double, 3> span;
  for (int a = 0; a < 3; ++a) span[a] = double(c.bounds_max[a]) - lo[a];
  const std::size_t norm_off = use_color ? 6 : 3;
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) out.at(i, static_cast<std::size_t>(a)) = T(c.positions[i][a]);
    if (use_color)
      for (int a = 0; a < 3; ++a)
        out.at(i, 3 + static_cast<std::size_t>(a)) = T(c.colors[i][a] / 255.0);
    for (int a = 0; a < 3; ++a) {
      const double v = span[a] > 0.0 ? (double(c.positions[i][a]) - lo[a]) / span[a] : 0.5;
      out.at(i, norm_off + static_cast<std::size_t>(a)) = T(v);
    }
  }
  return out;
}

// ---- depth projection ------------------------------------------------------

/// Pinhole camera, no distortion.
struct CameraIntrinsics {
  double focal_x = 725.0;
  double focal_y = 725.0;
  double center_x = 0.0;
  double center_y = 0.0;
  std::size_t width = 0;
  std::size_t height = 0;

  void validate() const {
    if (focal_x <= 0 || focal_y <= 0) throw ArgError("focal lengths must be positive");
    if (center_x < 0 || center_x > double(width) || center_y < 0 || center_y > double(height))
      throw ArgError("principal point outside the image");
  }
};

/// Lifts a depth image into a labeled cloud: for pixel (u,v) with depth z in
/// (0, max_depth), X=(u-cx)z/fx, Y=(v-cy)z/fy, Z=z. Pixels outside the depth
/// range are dropped.
inline LabeledPointCloud depth_to_cloud(const std::vector<float>& depth,
                                        const std::vector<std::uint16_t>& semantic,
                                        const std::vector<std::array<std::uint8_t, 3>>* pixel_colors,
                                        const CameraIntrinsics& k,
                                        double max_depth,
                                        std::vector<std::string> class_names) {
  k.validate();
  const std::size_t npix = k.width * k.height;
  if (depth.size() != npix || semantic.size() != npix)
    throw ShapeError("depth/semantic rasters have " + std::to_string(depth.size()) + "/" +
                     std::to_string(semantic.size()) + " pixels, intrinsics say " +
                     std::to_string(npix));
  if (pixel_colors && pixel_colors->size() != npix)
    throw ShapeError("color raster has " + std::to_string(pixel_colors->size()) +
                     " pixels, intrinsics say " + std::to_string(npix));
  LabeledPointCloud c;
  c.class_names = std::move(class_names);
  const std::uint16_t m = c.num_classes();
  for (std::size_t v = 0; v < k.height; ++v) {
    for (std::size_t u = 0; u < k.width; ++u) {
      const std::size_t idx = v * k.width + u;
      const double z = depth[idx];
      if (!(z > 0.0) || z >= max_depth) continue;
      if (semantic[idx] >= m)
        throw DataError("pixel label " + std::to_string(semantic[idx]) + " >= class count " +
                        std::to_string(m));
      const double x = (double(u) - k.center_x) * z / k.focal_x;
      const double y = (double(v) - k.center_y) * z / k.focal_y;
      c.positions.push_back({float(x), float(y), float(z)});
      c.labels.push_back(semantic[idx]);
      if (pixel_colors) c.colors.push_back((*pixel_colors)[idx]);
    }
  }
  c.recompute_bounds();
  return c;
}

}  // namespace ptseg
