#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "ptseg/pointcloud.hpp"
#include "ptseg/rng.hpp"
#include "ptseg/tensor.hpp"

namespace ptseg {

enum class SplitMode { train, test };

struct SamplerConfig {
  double block_size = 1.0;       // meters
  double train_stride = 0.5;     // meters
  double test_stride = 1.0;      // meters
  std::size_t points_per_block = 4096;
  std::vector<double> radii{0.25, 0.5, 1.0};
  std::size_t min_points = 32;   // windows below this are discarded
  std::uint64_t seed = 1;

  void validate() const {
    if (block_size <= 0) throw ArgError("block_size must be positive");
    if (train_stride <= 0 || train_stride > block_size)
      throw ArgError("train_stride must be in (0, block_size]");
    if (test_stride <= 0 || test_stride > block_size)
      throw ArgError("test_stride must be in (0, block_size]");
    if (points_per_block < 1) throw ArgError("points_per_block must be >= 1");
    if (radii.empty()) throw ArgError("radii must not be empty");
    for (std::size_t i = 1; i < radii.size(); ++i)
      if (radii[i] <= radii[i - 1]) throw ArgError("radii must be strictly ascending");
    if (radii[0] <= 0) throw ArgError("radii must be positive");
  }
};

/// An XY window over a cloud (full Z extent). For grid splits, (cell_i,
/// cell_j) are stride-lattice coordinates; for multi-scale windows the cell
/// is unused and the window is identified by its center and radius.
struct Block {
  std::vector<std::uint32_t> indices;
  int cell_i = 0;
  int cell_j = 0;
  double origin_x = 0.0;  // window minimum
  double origin_y = 0.0;
  double radius = 0.5;    // Chebyshev half-extent

  double center_x() const { return origin_x + radius; }
  double center_y() const { return origin_y + radius; }

  bool contains(float x, float y) const {
    return std::max(std::abs(double(x) - center_x()), std::abs(double(y) - center_y())) <=
           radius + 1e-9;
  }
};

/// Splits a cloud into XY windows of cfg.block_size at the mode's stride.
///
/// Test mode assigns every point to exactly one window (points on the far
/// boundary fold into the last window), so coverage is total and blocks are
/// pairwise disjoint. Train mode slides windows with half-open membership;
/// the far boundary is closed only on the final window of each axis.
/// Windows with fewer than cfg.min_points points are discarded.
inline std::vector<Block> split_into_blocks(const LabeledPointCloud& cloud,
                                            const SamplerConfig& cfg, SplitMode mode) {
  cfg.validate();
  if (cloud.size() == 0) throw ArgError("cannot split an empty cloud");
  const double stride = mode == SplitMode::train ? cfg.train_stride : cfg.test_stride;
  const double bs = cfg.block_size;
  const double min_x = cloud.bounds_min[0], min_y = cloud.bounds_min[1];
  const double span_x = double(cloud.bounds_max[0]) - min_x;
  const double span_y = double(cloud.bounds_max[1]) - min_y;

  std::map<std::pair<int, int>, std::vector<std::uint32_t>> members;

  if (mode == SplitMode::test) {
    const auto ncell = [&](double span) {
      return std::max<long>(1, static_cast<long>(std::floor(span / stride)) + 1);
    };
    const long nx = ncell(span_x), ny = ncell(span_y);
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
      const double rx = double(cloud.positions[i][0]) - min_x;
      const double ry = double(cloud.positions[i][1]) - min_y;
      long ci = std::min<long>(static_cast<long>(std::floor(rx / stride)), nx - 1);
      long cj = std::min<long>(static_cast<long>(std::floor(ry / stride)), ny - 1);
      members[{int(ci), int(cj)}].push_back(i);
    }
  } else {
    const auto origin_count = [&](double span) {
      if (span <= bs) return std::size_t{1};
      return static_cast<std::size_t>(std::ceil((span - bs) / stride - 1e-9)) + 1;
    };
    const std::size_t nx = origin_count(span_x), ny = origin_count(span_y);
    const auto covers = [&](double rel, std::size_t idx, std::size_t count, double span) {
      const double o = double(idx) * stride;
      if (rel < o - 1e-12) return false;
      if (rel < o + bs) return true;
      // far boundary folds into any window reaching the span end
      return rel <= span + 1e-12 && o + bs >= span - 1e-12 && idx + 1 == count;
    };
    for (std::uint32_t p = 0; p < cloud.size(); ++p) {
      const double rx = double(cloud.positions[p][0]) - min_x;
      const double ry = double(cloud.positions[p][1]) - min_y;
      const auto lo_idx = [&](double rel) {
        const double first = (rel - bs) / stride;
        return first < 0 ? std::size_t{0} : static_cast<std::size_t>(std::floor(first)) ;
      };
      for (std::size_t i = lo_idx(rx); i < nx && double(i) * stride <= rx + 1e-12; ++i) {
        if (!covers(rx, i, nx, span_x)) continue;
        for (std::size_t j = lo_idx(ry); j < ny && double(j) * stride <= ry + 1e-12; ++j) {
          if (!covers(ry, j, ny, span_y)) continue;
          members[{int(i), int(j)}].push_back(p);
        }
      }
    }
  }

  std::vector<Block> blocks;
  for (auto& [cell, idx] : members) {
    if (idx.size() < cfg.min_points) continue;
    Block b;
    b.cell_i = cell.first;
    b.cell_j = cell.second;
    b.origin_x = min_x + cell.first * stride;
    b.origin_y = min_y + cell.second * stride;
    b.radius = bs / 2.0;
    b.indices = std::move(idx);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

/// A block resampled to a fixed point count with assembled input features.
template <class T>
struct SampledBlock {
  Tensor<T> features;                   // [N, 6 or 9]
  std::vector<std::uint32_t> sources;   // original cloud indices, length N
  std::vector<std::uint16_t> labels;    // ground truth per sampled point
};

/// Draws exactly n points from a block: a uniform subset without replacement
/// when the block is large enough, otherwise every point plus uniform
/// redraws. Feature rows are [X,Y,Z,(R,G,B),X',Y',Z'] with XY shifted to the
/// block center and Z kept absolute.
template <class T>
SampledBlock<T> sample_block_points(const LabeledPointCloud& cloud, const Block& block,
                                    std::size_t n, bool use_color, Rng& rng) {
  if (block.indices.empty()) throw ArgError("cannot sample an empty block");
  if (use_color && !cloud.has_colors()) throw ArgError("cloud has no colors but use_color is set");

  std::vector<std::uint32_t> chosen;
  chosen.reserve(n);
  if (block.indices.size() >= n) {
    std::vector<std::uint32_t> pool = block.indices;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
      chosen.push_back(pool[i]);
    }
  } else {
    chosen = block.indices;
    while (chosen.size() < n) chosen.push_back(block.indices[rng.below(block.indices.size())]);
  }

  const std::size_t d = use_color ? 9 : 6;
  const std::size_t norm_off = use_color ? 6 : 3;
  SampledBlock<T> out;
  out.features = Tensor<T>(Shape{n, d});
  out.sources = std::move(chosen);
  out.labels.resize(n);
  std::array<double, 3> lo{cloud.bounds_min[0], cloud.bounds_min[1], cloud.bounds_min[2]};
  std::array<double, 3> span;
  for (int a = 0; a < 3; ++a) span[a] = double(cloud.bounds_max[a]) - lo[a];
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint32_t src = out.sources[r];
    const auto& p = cloud.positions[src];
    out.features.at(r, 0) = T(double(p[0]) - block.center_x());
    out.features.at(r, 1) = T(double(p[1]) - block.center_y());
    out.features.at(r, 2) = T(p[2]);
    if (use_color)
      for (int a = 0; a < 3; ++a) out.features.at(r, 3 + a) = T(cloud.colors[src][a] / 255.0);
    for (int a = 0; a < 3; ++a) {
      const double v = span[a] > 0.0 ? (double(p[a]) - lo[a]) / span[a] : 0.5;
      out.features.at(r, norm_off + a) = T(v);
    }
    out.labels[r] = cloud.labels[src];
  }
  return out;
}

enum class GroupKind { grid2x2, multiscale };

/// Structural 2x2 grid group: four slots in row-major cell order
/// (0,0),(0,1),(1,0),(1,1); `duplicated` marks slots filled by copying the
/// nearest present member because their own cell was missing.
struct GridGroup {
  std::array<std::size_t, 4> member;  // indices into the block list
  std::array<bool, 4> duplicated;
};

/// Groups grid blocks into 2x2 neighborhoods.
///
/// Train mode slides the 2x2 stencil one cell at a time across the occupied
/// cell range and keeps every placement with at least two present members.
/// Test mode tiles the cells into disjoint super-cells anchored at even
/// coordinates, so every surviving block lands in exactly one group; missing
/// slots are filled by duplicating the nearest present member.
inline std::vector<GridGroup> grid_groups(const std::vector<Block>& blocks, SplitMode mode) {
  std::vector<GridGroup> out;
  if (blocks.empty()) return out;
  std::map<std::pair<int, int>, std::size_t> by_cell;
  int min_i = blocks[0].cell_i, max_i = blocks[0].cell_i;
  int min_j = blocks[0].cell_j, max_j = blocks[0].cell_j;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    by_cell[{blocks[b].cell_i, blocks[b].cell_j}] = b;
    min_i = std::min(min_i, blocks[b].cell_i);
    max_i = std::max(max_i, blocks[b].cell_i);
    min_j = std::min(min_j, blocks[b].cell_j);
    max_j = std::max(max_j, blocks[b].cell_j);
  }

  static constexpr std::array<std::pair<int, int>, 4> kSlots{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};

  const auto build = [&](int base_i, int base_j) -> std::optional<GridGroup> {
    std::array<long, 4> found;
    int present = 0;
    for (int s = 0; s < 4; ++s) {
      auto it = by_cell.find({base_i + kSlots[s].first, base_j + kSlots[s].second});
      found[s] = it == by_cell.end() ? -1 : long(it->second);
      present += found[s] >= 0;
    }
    if (present == 0) return std::nullopt;
    GridGroup g{};
    for (int s = 0; s < 4; ++s) {
      if (found[s] >= 0) {
        g.member[s] = std::size_t(found[s]);
        g.duplicated[s] = false;
        continue;
      }
      // nearest present slot in cell distance; ties to the earliest slot
      int best = -1, best_d = 1 << 30;
      for (int t = 0; t < 4; ++t) {
        if (found[t] < 0) continue;
        const int di = kSlots[s].first - kSlots[t].first;
        const int dj = kSlots[s].second - kSlots[t].second;
        const int dist = di * di + dj * dj;
        if (dist < best_d) {
          best_d = dist;
          best = t;
        }
      }
      g.member[s] = std::size_t(found[best]);
      g.duplicated[s] = true;
    }
    if (mode == SplitMode::train && present < 2) return std::nullopt;
    return g;
  };

  if (mode == SplitMode::test) {
    const auto super_base = [](int c) { return c >= 0 ? c / 2 * 2 : (c - 1) / 2 * 2; };
    std::map<std::pair<int, int>, bool> done;
    for (const auto& [cell, idx] : by_cell) {
      const std::pair<int, int> base{super_base(cell.first), super_base(cell.second)};
      if (done.count(base)) continue;
      done[base] = true;
      if (auto g = build(base.first, base.second)) out.push_back(*g);
    }
  } else {
    for (int i = min_i; i < max_i; ++i)
      for (int j = min_j; j < max_j; ++j)
        if (auto g = build(i, j)) out.push_back(*g);
  }
  return out;
}

/// A group of sampled blocks: the unit the context architectures consume.
template <class T>
struct BlockGroup {
  GroupKind kind = GroupKind::grid2x2;
  std::vector<Block> blocks;               // grid: 4 row-major; ms: ascending radius
  std::vector<SampledBlock<T>> samples;    // parallel to blocks
  std::vector<std::uint8_t> duplicated;    // grid slots filled from a neighbor
};

template <class T>
BlockGroup<T> sample_grid_group(const LabeledPointCloud& cloud, const std::vector<Block>& blocks,
                                const GridGroup& layout, std::size_t n, bool use_color, Rng& rng) {
  BlockGroup<T> out;
  out.kind = GroupKind::grid2x2;
  for (int s = 0; s < 4; ++s) {
    out.blocks.push_back(blocks[layout.member[s]]);
    out.samples.push_back(sample_block_points<T>(cloud, blocks[layout.member[s]], n, use_color, rng));
    out.duplicated.push_back(layout.duplicated[s] ? 1 : 0);
  }
  return out;
}

/// Concentric multi-scale group: windows share one center drawn from the
/// cloud's own points, one window per configured radius (ascending), each
/// independently resampled to the configured point count.
template <class T>
BlockGroup<T> multiscale_sample(const LabeledPointCloud& cloud, const SamplerConfig& cfg,
                                bool use_color, Rng& rng, int max_attempts = 100) {
  cfg.validate();
  if (cloud.size() == 0) throw ArgError("cannot sample an empty cloud");
  const double r_max = cfg.radii.back();
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const std::uint32_t center_idx = std::uint32_t(rng.below(cloud.size()));
    const double cx = cloud.positions[center_idx][0];
    const double cy = cloud.positions[center_idx][1];
    std::vector<std::vector<std::uint32_t>> members(cfg.radii.size());
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
      const double d = std::max(std::abs(double(cloud.positions[i][0]) - cx),
                                std::abs(double(cloud.positions[i][1]) - cy));
      if (d > r_max) continue;
      for (std::size_t s = 0; s < cfg.radii.size(); ++s)
        if (d <= cfg.radii[s]) members[s].push_back(i);
    }
    if (members.back().size() < cfg.min_points) continue;
    BlockGroup<T> out;
    out.kind = GroupKind::multiscale;
    for (std::size_t s = 0; s < cfg.radii.size(); ++s) {
      Block b;
      b.origin_x = cx - cfg.radii[s];
      b.origin_y = cy - cfg.radii[s];
      b.radius = cfg.radii[s];
      b.indices = std::move(members[s]);
      out.samples.push_back(sample_block_points<T>(cloud, b, cfg.points_per_block, use_color, rng));
      out.blocks.push_back(std::move(b));
    }
    return out;
  }
  throw SamplingError("no window center with >= " + std::to_string(cfg.min_points) +
                      " points within radius " + std::to_string(r_max) + " after " +
                      std::to_string(max_attempts) + " attempts");
}

/// Multi-scale group at a fixed center (prediction path: one group per test
/// block, centered on that block).
template <class T>
BlockGroup<T> multiscale_at(const LabeledPointCloud& cloud, const SamplerConfig& cfg, double cx,
                            double cy, bool use_color, Rng& rng) {
  cfg.validate();
  BlockGroup<T> out;
  out.kind = GroupKind::multiscale;
  for (std::size_t s = 0; s < cfg.radii.size(); ++s) {
    Block b;
    b.origin_x = cx - cfg.radii[s];
    b.origin_y = cy - cfg.radii[s];
    b.radius = cfg.radii[s];
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
      const double d = std::max(std::abs(double(cloud.positions[i][0]) - cx),
                                std::abs(double(cloud.positions[i][1]) - cy));
      if (d <= cfg.radii[s]) b.indices.push_back(i);
    }
    if (b.indices.empty())
      throw SamplingError("empty multi-scale window at fixed center (" + std::to_string(cx) +
                          ", " + std::to_string(cy) + ")");
    out.samples.push_back(sample_block_points<T>(cloud, b, cfg.points_per_block, use_color, rng));
    out.blocks.push_back(std::move(b));
  }
  return out;
}

}  // namespace ptseg
