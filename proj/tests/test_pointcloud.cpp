#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "ptseg/init.hpp"
#include "ptseg/pointcloud.hpp"
#include "ptseg/synth.hpp"
#include "test_support.hpp"

using namespace ptseg;
using Catch::Approx;

namespace {

LabeledPointCloud random_cloud(Rng& rng, std::size_t n, std::uint16_t m, bool colored) {
  LabeledPointCloud c;
  for (std::uint16_t k = 0; k < m; ++k) c.class_names.push_back("class_" + std::to_string(k));
  for (std::size_t i = 0; i < n; ++i) {
    c.positions.push_back({float(rng.uniform(-5, 5)), float(rng.uniform(-5, 5)),
                           float(rng.uniform(0, 3))});
    c.labels.push_back(static_cast<std::uint16_t>(rng.below(m)));
    if (colored)
      c.colors.push_back({std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256)),
                          std::uint8_t(rng.below(256))});
  }
  c.recompute_bounds();
  return c;
}

bool same_payload(const LabeledPointCloud& a, const LabeledPointCloud& b) {
  return a.positions == b.positions && a.colors == b.colors && a.labels == b.labels &&
         a.num_classes() == b.num_classes();
}

}  // namespace

TEST_CASE("cloud save/load round-trips bitwise in both formats") {
  Rng rng(31);
  auto tmp = std::filesystem::temp_directory_path();
  for (int trial = 0; trial < 8; ++trial) {
    const bool colored = trial % 2 == 0;
    auto c = random_cloud(rng, 50 + rng.below(100), std::uint16_t(2 + rng.below(6)), colored);
    const auto bin = (tmp / "ptseg_rt.pcsg").string();
    const auto asc = (tmp / "ptseg_rt.pcsa").string();
    save_cloud(bin, c, CloudFormat::binary);
    save_cloud(asc, c, CloudFormat::ascii);
    auto cb = load_cloud(bin, CloudFormat::binary);
    auto ca = load_cloud(asc, CloudFormat::ascii);
    REQUIRE(same_payload(c, cb));
    REQUIRE(cb.class_names == c.class_names);  // binary carries names
    REQUIRE(same_payload(c, ca));
    REQUIRE(cb.bounds_min == c.bounds_min);
    REQUIRE(cb.bounds_max == c.bounds_max);
    // auto-detection picks the right parser
    REQUIRE(same_payload(load_cloud_auto(bin), c));
    REQUIRE(same_payload(load_cloud_auto(asc), c));
  }
  std::filesystem::remove(tmp / "ptseg_rt.pcsg");
  std::filesystem::remove(tmp / "ptseg_rt.pcsa");
}

TEST_CASE("ascii parsing") {
  SECTION("minimal colorless line") {
    auto c = cloud_from_ascii("pcsg-ascii M=2 color=0\n0 0 0 1\n");
    REQUIRE(c.size() == 1);
    REQUIRE(c.labels[0] == 1);
    REQUIRE(c.positions[0] == std::array<float, 3>{0, 0, 0});
  }
  SECTION("label overflow is a data error") {
    REQUIRE_THROWS_AS(cloud_from_ascii("pcsg-ascii M=2 color=0\n0 0 0 2\n"), DataError);
  }
  SECTION("wrong field count is a format error with the line number") {
    try {
      cloud_from_ascii("pcsg-ascii M=2 color=0\n0 0 0 1\n1 2 3\n");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
}

TEST_CASE("binary truncation errors name byte counts") {
  Rng rng(7);
  auto c = random_cloud(rng, 10, 3, true);
  auto bytes = cloud_bytes(c);
  // Chop mid-point.
  bytes.resize(bytes.size() - 5);
  ByteReader r(bytes, "trunc.pcsg");
  try {
    parse_cloud_binary(r);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("truncated at byte") != std::string::npos);
    REQUIRE(msg.find("needed") != std::string::npos);
  }
  SECTION("bad magic") {
    ByteReader r2(std::vector<std::uint8_t>{'N', 'O', 'P', 'E', 0, 0, 0, 0}, "x");
    REQUIRE_THROWS_AS(parse_cloud_binary(r2), FormatError);
  }
}

TEST_CASE("assemble_features normalization") {
  SECTION("cloud spanning [0,2]^3 maps (1,1,1) to (0.5,0.5,0.5)") {
    LabeledPointCloud c;
    c.class_names = {"a"};
    c.positions = {{0, 0, 0}, {2, 2, 2}, {1, 1, 1}};
    c.labels = {0, 0, 0};
    c.recompute_bounds();
    auto f = assemble_features<double>(c, false);
    REQUIRE(f.shape() == Shape{3, 6});
    for (int a = 0; a < 3; ++a) REQUIRE(f.at(2, 3 + a) == Approx(0.5));
    // raw coordinates pass through
    REQUIRE(f.at(2, 0) == 1.0);
  }
  SECTION("single point degenerates to 0.5 on every axis") {
    LabeledPointCloud c;
    c.class_names = {"a"};
    c.positions = {{3, -1, 7}};
    c.labels = {0};
    c.recompute_bounds();
    auto f = assemble_features<double>(c, false);
    for (int a = 0; a < 3; ++a) REQUIRE(f.at(0, 3 + a) == 0.5);
  }
  SECTION("missing colors with use_color is an error") {
    LabeledPointCloud c;
    c.class_names = {"a"};
    c.positions = {{0, 0, 0}};
    c.labels = {0};
    REQUIRE_THROWS_AS(assemble_features<double>(c, true), ArgError);
  }
  SECTION("normalized columns stay in [0,1] over 1000 random clouds") {
    Rng rng(41);
    for (int trial = 0; trial < 1000; ++trial) {
      auto c = random_cloud(rng, 3 + rng.below(20), 2, true);
      auto f = assemble_features<float>(c, true);
      for (std::size_t i = 0; i < f.rows(); ++i)
        for (std::size_t j = 6; j < 9; ++j) {
          REQUIRE(f.at(i, j) >= 0.0f);
          REQUIRE(f.at(i, j) <= 1.0f);
        }
      // color columns are the exact 8-bit values scaled by 1/255
      REQUIRE(f.at(0, 3) == Approx(c.colors[0][0] / 255.0));
    }
  }
}

TEST_CASE("depth projection") {
  CameraIntrinsics k;
  k.focal_x = k.focal_y = 100.0;
  k.width = 128;
  k.height = 128;
  k.center_x = 64.0;
  k.center_y = 64.0;

  SECTION("principal point ray lands on the optical axis") {
    std::vector<float> depth(128 * 128, 0.f);
    std::vector<std::uint16_t> sem(128 * 128, 0);
    depth[64 * 128 + 64] = 5.f;
    auto c = depth_to_cloud(depth, sem, nullptr, k, 80.0, {"x"});
    REQUIRE(c.size() == 1);
    REQUIRE(c.positions[0] == std::array<float, 3>{0, 0, 5});
  }
  SECTION("similar triangles: 100 px right of center at depth 2 gives X=2") {
    std::vector<float> depth(128 * 128, 0.f);
    std::vector<std::uint16_t> sem(128 * 128, 0);
    // u = cx + 100 is off-raster for w=128; widen the sensor for this case.
    CameraIntrinsics k2 = k;
    k2.width = 256;
    k2.height = 8;
    k2.center_x = 100.0;
    k2.center_y = 4.0;
    std::vector<float> d2(256 * 8, 0.f);
    std::vector<std::uint16_t> s2(256 * 8, 0);
    d2[4 * 256 + 200] = 2.f;
    auto c = depth_to_cloud(d2, s2, nullptr, k2, 80.0, {"x"});
    REQUIRE(c.size() == 1);
    REQUIRE(c.positions[0][0] == Approx(2.0));
    REQUIRE(c.positions[0][2] == 2.0f);
  }
  SECTION("pixels at or beyond max_depth are dropped") {
    std::vector<float> depth(128 * 128, 100.f);
    std::vector<std::uint16_t> sem(128 * 128, 0);
    auto c = depth_to_cloud(depth, sem, nullptr, k, 80.0, {"x"});
    REQUIRE(c.size() == 0);
  }
  SECTION("shape mismatch is a dimension error") {
    std::vector<float> depth(10, 1.f);
    std::vector<std::uint16_t> sem(128 * 128, 0);
    REQUIRE_THROWS_AS(depth_to_cloud(depth, sem, nullptr, k, 80.0, {"x"}), ShapeError);
  }

  SECTION("render oracle: a fronto-parallel box face projects back to its corners") {
    // Inverted pinhole render: the face x,y in [-0.5,0.5]^2 at depth 2 covers
    // exactly pixels u,v in [39,89]^2 (u = cx + x*fx/z with fx=100, z=2).
    const double z0 = 2.0;
    std::vector<float> depth(128 * 128, 0.f);
    std::vector<std::uint16_t> sem(128 * 128, 0);
    for (std::size_t v = 39; v <= 89; ++v)
      for (std::size_t u = 39; u <= 89; ++u) depth[v * 128 + u] = float(z0);
    auto c = depth_to_cloud(depth, sem, nullptr, k, 80.0, {"x"});
    REQUIRE(c.size() == 51 * 51);
    c.recompute_bounds();
    REQUIRE(std::abs(c.bounds_min[0] + 0.5f) < 1e-5f);
    REQUIRE(std::abs(c.bounds_max[0] - 0.5f) < 1e-5f);
    REQUIRE(std::abs(c.bounds_min[1] + 0.5f) < 1e-5f);
    REQUIRE(std::abs(c.bounds_max[1] - 0.5f) < 1e-5f);
    REQUIRE(c.bounds_min[2] == float(z0));
    REQUIRE(c.bounds_max[2] == float(z0));
  }

  SECTION("re-projection recovers pixel centers within 0.5 px and depth exactly") {
    Rng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<float> depth(128 * 128);
      std::vector<std::uint16_t> sem(128 * 128, 0);
      for (auto& d : depth) {
        const double r = rng.uniform();
        d = r < 0.2 ? 0.f : float(rng.uniform(0.5, 60.0));
      }
      auto c = depth_to_cloud(depth, sem, nullptr, k, 80.0, {"x"});
      std::size_t pt = 0;
      for (std::size_t v = 0; v < 128; ++v)
        for (std::size_t u = 0; u < 128; ++u) {
          const float z = depth[v * 128 + u];
          if (!(z > 0.f) || z >= 80.f) continue;
          const auto& p = c.positions[pt++];
          REQUIRE(p[2] == z);  // depth exact
          const double u_rec = double(p[0]) * k.focal_x / double(p[2]) + k.center_x;
          const double v_rec = double(p[1]) * k.focal_y / double(p[2]) + k.center_y;
          REQUIRE(std::abs(u_rec - double(u)) <= 0.5);
          REQUIRE(std::abs(v_rec - double(v)) <= 0.5);
        }
      REQUIRE(pt == c.size());
    }
  }
}

TEST_CASE("synthetic scenes") {
  SECTION("same seed gives identical clouds") {
    SceneRecipe r;
    r.seed = 77;
    auto a = synth_scene(r);
    auto b = synth_scene(r);
    REQUIRE(a.positions == b.positions);
    REQUIRE(a.labels == b.labels);
    REQUIRE(a.colors == b.colors);
  }
  SECTION("floor point count matches density expectation") {
    SceneRecipe r;
    r.extent = {2.0, 2.0, 2.0};
    r.density = 100.0;
    r.include_ceiling = false;
    r.wall_count = 0;
    r.box_count = 0;
    r.pole_count = 0;
    auto c = synth_scene(r);
    REQUIRE(c.size() > 300);
    REQUIRE(c.size() < 500);
    for (auto l : c.labels) REQUIRE(l == 0);
  }
  SECTION("point count scales linearly with density") {
    SceneRecipe r;
    r.seed = 5;
    const auto n1 = synth_scene(r).size();
    r.density *= 4.0;
    const auto n4 = synth_scene(r).size();
    const double ratio = double(n4) / double(n1);
    REQUIRE(ratio > 4.0 * 0.9);
    REQUIRE(ratio < 4.0 * 1.1);
  }
  SECTION("coupled scenes: labels valid, both classes present, geometry identical") {
    auto clouds = testsupport::context_train_clouds();
    std::size_t count_a = 0, count_b = 0;
    for (const auto& c : clouds) {
      REQUIRE(c.num_classes() == 6);
      c.validate();
      for (auto l : c.labels) {
        count_a += l == testsupport::kCoupledA;
        count_b += l == testsupport::kCoupledB;
      }
    }
    REQUIRE(count_a > 0);
    REQUIRE(count_b > 0);
    // Roughly balanced classes across the fixed benchmark.
    const double frac = double(count_a) / double(count_a + count_b);
    REQUIRE(frac > 0.35);
    REQUIRE(frac < 0.65);
  }
  SECTION("single-cell classifier is at chance on the coupled classes") {
    // Benchmark split (small sample, frozen) plus a 32/32 scene sample where
    // the chance-level accuracy is statistically visible.
    const double acc_bench = testsupport::nearest_centroid_accuracy(
        testsupport::context_train_clouds(), testsupport::context_test_clouds());
    INFO("no-context oracle accuracy on benchmark split " << acc_bench);
    REQUIRE(acc_bench <= 0.55);
    const double acc_wide = testsupport::nearest_centroid_accuracy(
        testsupport::context_extended_clouds(1001, 32), testsupport::context_extended_clouds(2001, 32));
    INFO("no-context oracle accuracy on extended sample " << acc_wide);
    REQUIRE(acc_wide <= 0.55);
  }
}
