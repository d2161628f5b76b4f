#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ptseg/pointcloud.hpp"
#include "ptseg/rng.hpp"

namespace ptseg {

/// Procedural labeled room generator used for desk-scale experiments.
///
/// Classes without context coupling: floor, ceiling, wall, pole, box (M=5).
/// With context coupling the box class splits into box_a / box_b (M=6): the
/// two are geometrically and chromatically identical, and a box is box_a
/// exactly when a pole marker stands in an edge-adjacent 1x1 m cell (never
/// in the box's own cell), placed inside the same even-anchored 2x2 m
/// super-cell so that 2x2 grid groups and 1 m radius windows both see it.
/// A classifier restricted to a single cell is at chance on the two box
/// classes by construction.
struct SceneRecipe {
  std::uint64_t seed = 1;
  std::array<double, 3> extent{4.0, 4.0, 2.5};
  double density = 200.0;  // points per square meter of surface
  bool include_floor = true;
  bool include_ceiling = true;
  int wall_count = 4;   // 0..4 perimeter walls
  int box_count = 3;    // box-shaped "furniture"
  double box_size = 0.5;
  int pole_count = 2;   // free-standing thin structures (ignored when coupling)
  double pole_height = 1.8;
  double pole_width = 0.06;
  bool context_coupling = false;

  void validate() const {
    if (extent[0] <= 0 || extent[1] <= 0 || extent[2] <= 0)
      throw ArgError("scene extent must be positive");
    if (density <= 0) throw ArgError("point density must be positive");
    if (wall_count < 0 || wall_count > 4) throw ArgError("wall_count must be 0..4");
    if (box_count < 0 || pole_count < 0) throw ArgError("object counts must be >= 0");
    if (context_coupling && (extent[0] < 2.0 || extent[1] < 2.0))
      throw ArgError("context coupling needs at least a 2x2 m floor plan");
  }
};

namespace synth_detail {

// Class ids in generated scenes.
inline constexpr std::uint16_t kFloor = 0;
inline constexpr std::uint16_t kCeiling = 1;
inline constexpr std::uint16_t kWall = 2;
inline constexpr std::uint16_t kPole = 3;
inline constexpr std::uint16_t kBox = 4;    // box_a under coupling
inline constexpr std::uint16_t kBoxB = 5;   // coupling only

inline std::array<std::uint8_t, 3> class_color(std::uint16_t cls) {
  switch (cls) {
    case kFloor: return {60, 60, 200};
    case kCeiling: return {60, 200, 60};
    case kWall: return {200, 200, 80};
    case kPole: return {200, 60, 200};
    default: return {200, 90, 40};  // both box classes look the same
  }
}

struct Builder {
  LabeledPointCloud cloud;
  double density;
  Rng rng;

  Builder(double dens, std::uint64_t seed) : density(dens), rng(seed) {}

  void add_point(double x, double y, double z, std::uint16_t cls) {
    cloud.positions.push_back({float(x), float(y), float(z)});
    auto base = class_color(cls);
    std::array<std::uint8_t, 3> col;
    for (int a = 0; a < 3; ++a) {
      const int jitter = int(rng.below(25)) - 12;
      col[a] = static_cast<std::uint8_t>(std::clamp(int(base[a]) + jitter, 0, 255));
    }
    cloud.colors.push_back(col);
    cloud.labels.push_back(cls);
  }

  /// Uniform samples on the rectangle origin + s*edge_u + t*edge_v, s,t in [0,1].
  void rect(std::array<double, 3> origin, std::array<double, 3> eu, std::array<double, 3> ev,
            std::uint16_t cls) {
    const double area = norm(eu) * norm(ev);
    const auto n = static_cast<std::size_t>(std::llround(area * density));
    for (std::size_t i = 0; i < n; ++i) {
      const double s = rng.uniform(), t = rng.uniform();
      add_point(origin[0] + s * eu[0] + t * ev[0], origin[1] + s * eu[1] + t * ev[1],
                origin[2] + s * eu[2] + t * ev[2], cls);
    }
  }

  /// Axis-aligned box surface: four sides plus the top (no bottom).
  void box(double cx, double cy, double sx, double sy, double z0, double z1, std::uint16_t cls) {
    const double x0 = cx - sx / 2, x1 = cx + sx / 2;
    const double y0 = cy - sy / 2, y1 = cy + sy / 2;
    const double h = z1 - z0;
    rect({x0, y0, z0}, {sx, 0, 0}, {0, 0, h}, cls);
    rect({x0, y1, z0}, {sx, 0, 0}, {0, 0, h}, cls);
    rect({x0, y0, z0}, {0, sy, 0}, {0, 0, h}, cls);
    rect({x1, y0, z0}, {0, sy, 0}, {0, 0, h}, cls);
    rect({x0, y0, z1}, {sx, 0, 0}, {0, sy, 0}, cls);
  }

  static double norm(const std::array<double, 3>& v) {
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  }
};

}  // namespace synth_detail

inline LabeledPointCloud synth_scene(const SceneRecipe& recipe) {
  using namespace synth_detail;
  recipe.validate();
  Builder b(recipe.density, recipe.seed);
  const double ex = recipe.extent[0], ey = recipe.extent[1], ez = recipe.extent[2];

  b.cloud.class_names = {"floor", "ceiling", "wall", "pole", "box"};
  if (recipe.context_coupling) {
    b.cloud.class_names[4] = "box_a";
    b.cloud.class_names.push_back("box_b");
  }

  // Corner anchors pin the XY bounds to [0,extent] exactly, which keeps the
  // 1 m block lattice aligned with the generator's cell grid.
  b.add_point(0, 0, 0, kFloor);
  b.add_point(ex, 0, 0, kFloor);
  b.add_point(0, ey, 0, kFloor);
  b.add_point(ex, ey, 0, kFloor);

  if (recipe.include_floor) b.rect({0, 0, 0}, {ex, 0, 0}, {0, ey, 0}, kFloor);
  if (recipe.include_ceiling) b.rect({0, 0, ez}, {ex, 0, 0}, {0, ey, 0}, kCeiling);
  const std::array<std::array<std::array<double, 3>, 3>, 4> walls{{
      {{{0, 0, 0}, {ex, 0, 0}, {0, 0, ez}}},
      {{{0, ey, 0}, {ex, 0, 0}, {0, 0, ez}}},
      {{{0, 0, 0}, {0, ey, 0}, {0, 0, ez}}},
      {{{ex, 0, 0}, {0, ey, 0}, {0, 0, ez}}},
  }};
  for (int wIdx = 0; wIdx < recipe.wall_count; ++wIdx)
    b.rect(walls[wIdx][0], walls[wIdx][1], walls[wIdx][2], kWall);

  const double box_h = recipe.box_size;
  auto place_pole = [&](double px, double py) {
    b.box(px, py, recipe.pole_width, recipe.pole_width, 0.0, recipe.pole_height, kPole);
  };

  if (!recipe.context_coupling) {
    const double margin = recipe.box_size / 2 + 0.1;
    for (int i = 0; i < recipe.box_count; ++i) {
      const double cx = b.rng.uniform(margin, ex - margin);
      const double cy = b.rng.uniform(margin, ey - margin);
      b.box(cx, cy, recipe.box_size, recipe.box_size, 0.0, box_h, kBox);
    }
    const double pm = recipe.pole_width / 2 + 0.1;
    for (int i = 0; i < recipe.pole_count; ++i)
      place_pole(b.rng.uniform(pm, ex - pm), b.rng.uniform(pm, ey - pm));
    b.cloud.recompute_bounds();
    return b.cloud;
  }

  // Context coupling: one box per chosen 2x2 super-cell; a marker pole in an
  // edge-adjacent cell of the same super-cell decides the box class.
  const int cells_x = int(std::floor(ex));
  const int cells_y = int(std::floor(ey));
  std::vector<std::array<int, 2>> super_cells;
  for (int i = 0; i + 1 < cells_x; i += 2)
    for (int j = 0; j + 1 < cells_y; j += 2) super_cells.push_back({i, j});
  // Deterministic shuffle of candidate super-cells.
  for (std::size_t i = super_cells.size(); i > 1; --i)
    std::swap(super_cells[i - 1], super_cells[b.rng.below(i)]);
  const std::size_t boxes = std::min<std::size_t>(recipe.box_count, super_cells.size());

  // Balanced class assignment: half the boxes get markers (box_a).
  std::vector<bool> has_marker(boxes, false);
  const std::size_t marker_count = boxes / 2 + (boxes % 2 ? b.rng.below(2) : 0);
  for (std::size_t i = 0; i < marker_count; ++i) has_marker[i] = true;
  for (std::size_t i = boxes; i > 1; --i)
    std::swap(has_marker[i - 1], has_marker[b.rng.below(i)]);

  for (std::size_t bi = 0; bi < boxes; ++bi) {
    const auto [si, sj] = std::pair(super_cells[bi][0], super_cells[bi][1]);
    const int di = int(b.rng.below(2)), dj = int(b.rng.below(2));
    const int cell_i = si + di, cell_j = sj + dj;
    // Box centered inside its cell, clear of every cell edge.
    const double off = recipe.box_size / 2 + 0.1;
    const double cx = cell_i + b.rng.uniform(off, 1.0 - off);
    const double cy = cell_j + b.rng.uniform(off, 1.0 - off);
    const std::uint16_t cls = has_marker[bi] ? kBox : kBoxB;
    b.box(cx, cy, recipe.box_size, recipe.box_size, 0.0, box_h, cls);

    if (has_marker[bi]) {
      // Edge-adjacent in-tile partner cell: flip i or j within the super-cell.
      const bool flip_i = b.rng.coin();
      const int mi = flip_i ? si + (1 - di) : cell_i;
      const int mj = flip_i ? cell_j : sj + (1 - dj);
      // Close to the shared edge so 1 m windows centered in the box cell
      // still cover it; lateral position near the cell middle.
      const double edge_dist = b.rng.uniform(0.15, 0.35);
      double px, py;
      if (flip_i) {
        px = mi > cell_i ? mi + edge_dist : cell_i - edge_dist;
        py = mj + b.rng.uniform(0.3, 0.7);
      } else {
        px = mi + b.rng.uniform(0.3, 0.7);
        py = mj > cell_j ? mj + edge_dist : cell_j - edge_dist;
      }
      place_pole(px, py);
    }
  }

  b.cloud.recompute_bounds();
  return b.cloud;
}

}  // namespace ptseg
