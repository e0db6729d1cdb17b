#include <doctest.h>

#include "faultguard/graph.hpp"
#include "test_util.hpp"

using namespace fg;

TEST_CASE("chunk means follow the floor boundary formula") {
  const std::vector<float> v{0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(chunk_means(v, 4) == std::vector<double>{0.5, 2.5, 4.5, 6.5});
  // d=3: chunks {0,1}, {2,3,4}, {5,6,7}
  CHECK(chunk_means(v, 3) == std::vector<double>{0.5, 3.0, 6.0});
}

TEST_CASE("downsample scales by the max absolute value") {
  const std::vector<float> v{0, 1, 2, 3, 4, 5, 6, 7};
  const auto d4 = downsample(v, 4);
  CHECK(d4 == std::vector<double>{0.5 / 6.5, 2.5 / 6.5, 4.5 / 6.5, 1.0});
  // all-zero input: scaling is a no-op
  const std::vector<float> zeros(8, 0.0f);
  CHECK(downsample(zeros, 4) == std::vector<double>(4, 0.0));
}

TEST_CASE("inputs shorter than d leave empty chunks at zero") {
  const std::vector<float> v{2.0f, 4.0f};
  const auto out = chunk_means(v, 5);
  // floor boundaries 0,0,0,1,1,2: chunks {},{},{2},{},{4}
  CHECK(out == std::vector<double>{0.0, 0.0, 2.0, 0.0, 4.0});
  // and the L=3, d=4 shape from the boundary formula
  const std::vector<float> w{1.0f, 2.0f, 3.0f};
  CHECK(chunk_means(w, 4) == std::vector<double>{0.0, 1.0, 2.0, 3.0});
}

TEST_CASE("a 3-conv 1-fc chain becomes a five-node path graph") {
  ModelGraph m;
  m.name = "five_node";
  m.input_shape = {1, 16, 16};
  m.layers.push_back(LayerSpec::conv2d(1, 2, 3));
  m.layers.push_back(LayerSpec::conv2d(2, 2, 3));
  m.layers.push_back(LayerSpec::conv2d(2, 2, 3));
  m.layers.push_back(LayerSpec::fully_connected(2 * 10 * 10, 4));
  init_weights(m, 1);
  m.validate();

  SplitMix64 rng(3);
  const Tensor x = fgtest::random_tensor({1, 16, 16}, rng, 0.0f, 1.0f);
  const GraphSample g = build_graph(m, x, 8);
  CHECK(g.num_nodes() == 5);
  int edges = 0;
  for (size_t i = 0; i < g.num_nodes(); ++i)
    for (size_t j = 0; j < g.num_nodes(); ++j) edges += g.adjacency[i][j];
  CHECK(edges == 2 * 4);  // 4 undirected edges

  // adjacency row sums of a 5-node path
  std::vector<int> row_sums;
  for (size_t i = 0; i < g.num_nodes(); ++i) {
    int s = 0;
    for (size_t j = 0; j < g.num_nodes(); ++j) s += g.adjacency[i][j];
    row_sums.push_back(s);
  }
  CHECK(row_sums == std::vector<int>{1, 2, 2, 2, 1});
}

TEST_CASE("kind tags and feature width d+5") {
  const ModelGraph m = fgtest::tiny_cnn(7);
  SplitMix64 rng(7);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  const int d = 16;
  const GraphSample g = build_graph(m, x, d);
  REQUIRE(g.num_nodes() == m.layers.size() + 1);
  CHECK(g.feature_dim() == size_t(d + kNodeKindSlots));

  auto tag_of = [&](size_t node) {
    for (int k = 0; k < kNodeKindSlots; ++k) {
      if (g.node_features[node][size_t(d + k)] == 1.0) return k;
    }
    return -1;
  };
  CHECK(tag_of(0) == int(NodeKind::Input));
  CHECK(tag_of(1) == int(NodeKind::Conv));
  CHECK(tag_of(2) == int(NodeKind::Other));  // relu
  CHECK(tag_of(3) == int(NodeKind::Pool));
  CHECK(tag_of(4) == int(NodeKind::Other));  // flatten
  CHECK(tag_of(5) == int(NodeKind::Fc));
}

TEST_CASE("two inputs differ only in the node-0 feature row") {
  const ModelGraph m = fgtest::tiny_cnn(8);
  SplitMix64 rng(8);
  const Tensor x1 = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  const Tensor x2 = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  const GraphSample g1 = build_graph(m, x1, 16);
  const GraphSample g2 = build_graph(m, x2, 16);
  CHECK(g1.node_features[0] != g2.node_features[0]);
  for (size_t v = 1; v < g1.num_nodes(); ++v) CHECK(g1.node_features[v] == g2.node_features[v]);
  CHECK(g1.adjacency == g2.adjacency);
}

TEST_CASE("parameter-free layers carry a zero feature vector before the tag") {
  const ModelGraph m = fgtest::tiny_cnn(9);
  SplitMix64 rng(9);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  const int d = 12;
  const GraphSample g = build_graph(m, x, d);
  for (size_t v : {size_t(2), size_t(3), size_t(4)}) {  // relu, pool, flatten
    for (int i = 0; i < d; ++i) CHECK(g.node_features[v][size_t(i)] == 0.0);
  }
}

TEST_CASE("graph invariants hold for random chain models") {
  SplitMix64 rng(10);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const ModelGraph m = fgtest::tiny_cnn(seed);
    const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
    const GraphSample g = build_graph(m, x, 8);
    g.check();  // symmetric, zero diagonal, 0/1
    // path graph: node v neighbors are v-1, v+1
    for (size_t v = 0; v + 1 < g.num_nodes(); ++v) {
      CHECK(g.adjacency[v][v + 1] == 1);
    }
  }
}
