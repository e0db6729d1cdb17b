#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "faultguard/errors.hpp"
#include "faultguard/model_io.hpp"
#include "test_util.hpp"

using namespace fg;

TEST_CASE("save/load round-trip is bit-identical for randomized models") {
  fgtest::TempDir dir("model_rt");
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    const ModelGraph m = seed % 2 ? fgtest::tiny_cnn(seed) : make_lenet(seed);
    save_model(m, dir.file("m.json"), dir.file("m.bin"));
    const ModelGraph back = load_model(dir.file("m.json"));
    CHECK(back.name == m.name);
    CHECK(back.input_shape == m.input_shape);
    REQUIRE(back.layers.size() == m.layers.size());
    CHECK(back.weights_hash() == m.weights_hash());
    for (size_t i = 0; i < m.layers.size(); ++i) {
      CHECK(back.layers[i].kind == m.layers[i].kind);
      if (m.layers[i].has_params()) {
        CHECK(back.layers[i].weight.same_bits(m.layers[i].weight));
        CHECK(back.layers[i].bias.same_bits(m.layers[i].bias));
      }
    }
  }
}

TEST_CASE("a 4-weight single-layer model produces a 16+bias-byte blob") {
  fgtest::TempDir dir("blob");
  ModelGraph m;
  m.name = "one";
  m.input_shape = {2};
  m.layers.push_back(LayerSpec::fully_connected(2, 2));
  init_weights(m, 9);
  save_model(m, dir.file("m.json"), dir.file("m.bin"));
  // 4 weights + 2 biases, 4 bytes each
  CHECK(std::filesystem::file_size(dir.file("m.bin")) == 4 * 4 + 2 * 4);
}

TEST_CASE("manifest referencing a missing blob fails to resolve") {
  fgtest::TempDir dir("missing");
  const ModelGraph m = fgtest::tiny_cnn(3);
  save_model(m, dir.file("m.json"), dir.file("m.bin"));
  std::filesystem::remove(dir.file("m.bin"));
  CHECK_THROWS_WITH_AS(load_model(dir.file("m.json")), doctest::Contains("missing blob"),
                       FormatError);
}

TEST_CASE("offset overruns in the manifest are rejected") {
  fgtest::TempDir dir("overrun");
  const ModelGraph m = fgtest::tiny_cnn(4);
  save_model(m, dir.file("m.json"), dir.file("m.bin"));
  // truncate the blob so the last reference overruns
  const auto size = std::filesystem::file_size(dir.file("m.bin"));
  std::filesystem::resize_file(dir.file("m.bin"), size - 4);
  CHECK_THROWS_WITH_AS(load_model(dir.file("m.json")), doctest::Contains("overruns"),
                       FormatError);
}
