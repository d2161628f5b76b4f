#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "ptseg/init.hpp"
#include "ptseg/params.hpp"
#include "ptseg/rng.hpp"
#include "ptseg/tensor.hpp"

using namespace ptseg;

TEST_CASE("tensor shape bookkeeping") {
  Tensor<float> t({{1.f, 2.f}, {3.f, 4.f}, {5.f, 6.f}});
  REQUIRE(t.rank() == 2);
  REQUIRE(t.rows() == 3);
  REQUIRE(t.cols() == 2);
  REQUIRE(t.numel() == 6);
  REQUIRE(t.at(2, 1) == 6.f);

  REQUIRE_THROWS_AS(Tensor<float>(Shape{2, 3}, std::vector<float>(5, 0.f)), ShapeError);
  REQUIRE_THROWS_AS(Tensor<float>(Shape{0, 3}), ShapeError);
}

TEST_CASE("rng is deterministic and splits are independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  Rng base(7);
  Rng s1 = base.split(1), s2 = base.split(2);
  REQUIRE(s1.next_u64() != s2.next_u64());

  Rng u(3);
  for (int i = 0; i < 1000; ++i) {
    double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    REQUIRE(u.below(17) < 17);
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Graph<float> g;
  ParamStore<float> store;
  Rng rng(11);
  store.add("a.w", g.leaf(uniform_tensor<float>({3, 4}, -1.0, 1.0, rng), true));
  store.add("a.b", g.leaf(uniform_tensor<float>({4}, -1.0, 1.0, rng), true));
  store.add("deep.nested.name", g.leaf(uniform_tensor<float>({2, 2, 2}, -1.0, 1.0, rng), true));

  auto tmp = std::filesystem::temp_directory_path() / "ptseg_ckpt_test.ptsg";
  save_checkpoint(tmp.string(), g, store);

  Graph<float> g2;
  ParamStore<float> store2;
  store2.add("a.w", g2.leaf(Tensor<float>(Shape{3, 4}), true));
  store2.add("a.b", g2.leaf(Tensor<float>(Shape{4}), true));
  store2.add("deep.nested.name", g2.leaf(Tensor<float>(Shape{2, 2, 2}), true));
  load_checkpoint(tmp.string(), g2, store2);

  for (std::size_t i = 0; i < store.count(); ++i)
    REQUIRE(g.value(store.vars[i]) == g2.value(store2.vars[i]));

  // Saving the loaded store reproduces the file byte for byte.
  ByteWriter w1, w2;
  serialize_params(w1, g, store);
  serialize_params(w2, g2, store2);
  REQUIRE(w1.buffer() == w2.buffer());

  SECTION("shape mismatch is rejected") {
    Graph<float> g3;
    ParamStore<float> store3;
    store3.add("a.w", g3.leaf(Tensor<float>(Shape{4, 3}), true));
    store3.add("a.b", g3.leaf(Tensor<float>(Shape{4}), true));
    store3.add("deep.nested.name", g3.leaf(Tensor<float>(Shape{2, 2, 2}), true));
    REQUIRE_THROWS_AS(load_checkpoint(tmp.string(), g3, store3), ShapeError);
  }

  SECTION("truncated checkpoint names the byte position") {
    ByteWriter full;
    serialize_params(full, g, store);
    auto bytes = full.buffer();
    bytes.resize(bytes.size() - 7);
    ByteReader r(bytes, "trunc");
    REQUIRE_THROWS_AS(read_checkpoint_tensors<float>(r), FormatError);
  }

  std::filesystem::remove(tmp);
}

TEST_CASE("byte reader reports truncation offsets") {
  ByteReader r(std::vector<std::uint8_t>{1, 2, 3}, "probe");
  r.u16();
  try {
    r.u32();
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    REQUIRE(std::string(e.what()).find("byte 2") != std::string::npos);
  }
}
