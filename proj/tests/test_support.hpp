// Shared fixtures and independent oracles for the test suites. Everything
// here is test-only and deliberately avoids the library's model/sampler code
// paths it is used to check.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "ptseg/synth.hpp"

namespace ptseg::testsupport {

// ---- fixed context-coupling benchmark --------------------------------------

inline SceneRecipe context_recipe(std::uint64_t seed) {
  SceneRecipe r;
  r.seed = seed;
  r.extent = {4.0, 4.0, 2.2};
  r.density = 140.0;
  r.include_floor = true;
  r.include_ceiling = false;
  r.wall_count = 4;
  r.box_count = 4;
  r.box_size = 0.5;
  r.context_coupling = true;
  return r;
}

inline std::vector<LabeledPointCloud> context_train_clouds() {
  std::vector<LabeledPointCloud> out;
  for (std::uint64_t s = 101; s < 113; ++s) out.push_back(synth_scene(context_recipe(s)));
  return out;
}

inline std::vector<LabeledPointCloud> context_test_clouds() {
  std::vector<LabeledPointCloud> out;
  for (std::uint64_t s = 211; s < 215; ++s) out.push_back(synth_scene(context_recipe(s)));
  return out;
}

/// Larger sample from the same scene distribution; gives the no-context
/// oracle enough cells for its chance-level accuracy to concentrate.
inline std::vector<LabeledPointCloud> context_extended_clouds(std::uint64_t base, int count) {
  std::vector<LabeledPointCloud> out;
  for (int i = 0; i < count; ++i) out.push_back(synth_scene(context_recipe(base + i)));
  return out;
}

// Class ids of the geometrically identical coupled pair in coupled scenes.
inline constexpr std::uint16_t kCoupledA = 4;  // box_a
inline constexpr std::uint16_t kCoupledB = 5;  // box_b

// ---- no-context oracle ------------------------------------------------------
// Nearest-centroid classifier over descriptors computed from one 1x1 m cell
// in isolation. Whatever accuracy this reaches on the coupled classes is the
// ceiling for any single-block classifier; by construction it should be at
// chance.

struct CellSample {
  std::array<double, 6> descriptor;
  int label;  // 0 = box_a, 1 = box_b
};

inline std::vector<CellSample> coupled_cell_samples(const LabeledPointCloud& cloud) {
  struct Agg {
    std::size_t n = 0;
    double sz = 0, szz = 0;
    double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;
    int box_label = -1;
  };
  std::map<std::pair<int, int>, Agg> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    const std::pair<int, int> key{int(std::floor(p[0])), int(std::floor(p[1]))};
    Agg& a = cells[key];
    ++a.n;
    a.sz += p[2];
    a.szz += double(p[2]) * p[2];
    a.min_x = std::min(a.min_x, double(p[0]));
    a.max_x = std::max(a.max_x, double(p[0]));
    a.min_y = std::min(a.min_y, double(p[1]));
    a.max_y = std::max(a.max_y, double(p[1]));
    if (cloud.labels[i] == kCoupledA) a.box_label = 0;
    if (cloud.labels[i] == kCoupledB) a.box_label = 1;
  }
  std::vector<CellSample> out;
  for (const auto& [key, a] : cells) {
    if (a.box_label < 0) continue;
    const double mean_z = a.sz / double(a.n);
    const double var_z = std::max(0.0, a.szz / double(a.n) - mean_z * mean_z);
    out.push_back({{double(a.n) / 1000.0, mean_z, std::sqrt(var_z), a.max_x - a.min_x,
                    a.max_y - a.min_y, 0.0},
                   a.box_label});
  }
  return out;
}

inline double nearest_centroid_accuracy(const std::vector<LabeledPointCloud>& train,
                                        const std::vector<LabeledPointCloud>& test) {
  std::array<std::array<double, 6>, 2> centroid{};
  std::array<std::size_t, 2> count{};
  for (const auto& c : train)
    for (const auto& s : coupled_cell_samples(c)) {
      for (int k = 0; k < 6; ++k) centroid[s.label][k] += s.descriptor[k];
      ++count[s.label];
    }
  for (int l = 0; l < 2; ++l)
    for (int k = 0; k < 6; ++k) centroid[l][k] /= std::max<std::size_t>(1, count[l]);

  std::size_t hits = 0, total = 0;
  for (const auto& c : test)
    for (const auto& s : coupled_cell_samples(c)) {
      double d0 = 0, d1 = 0;
      for (int k = 0; k < 6; ++k) {
        d0 += (s.descriptor[k] - centroid[0][k]) * (s.descriptor[k] - centroid[0][k]);
        d1 += (s.descriptor[k] - centroid[1][k]) * (s.descriptor[k] - centroid[1][k]);
      }
      const int pred = d0 <= d1 ? 0 : 1;
      hits += pred == s.label;
      ++total;
    }
  return total ? double(hits) / double(total) : 0.0;
}

/// Per-point accuracy restricted to the coupled classes.
inline double coupled_point_accuracy(const LabeledPointCloud& cloud,
                                     const std::vector<std::uint16_t>& predicted) {
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels[i] != kCoupledA && cloud.labels[i] != kCoupledB) continue;
    hits += predicted[i] == cloud.labels[i];
    ++total;
  }
  return total ? double(hits) / double(total) : 0.0;
}

}  // namespace ptseg::testsupport
