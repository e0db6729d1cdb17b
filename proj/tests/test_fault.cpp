#include <doctest.h>

#include <bit>
#include <cmath>
#include <set>

#include "faultguard/errors.hpp"
#include "faultguard/fault.hpp"
#include "faultguard/nn.hpp"
#include "test_util.hpp"

using namespace fg;

TEST_CASE("flip_bit hits the documented IEEE-754 patterns on 1.0") {
  CHECK(flip_bit(1.0f, 31) == -1.0f);            // sign
  CHECK(flip_bit(1.0f, 22) == 1.5f);             // top mantissa bit
  CHECK(std::isinf(flip_bit(1.0f, 30)));         // exponent -> +inf
  CHECK(flip_bit(1.0f, 30) > 0.0f);
}

TEST_CASE("flip_bit is involutive on arbitrary patterns") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const uint32_t pattern = static_cast<uint32_t>(rng.next());
    const float x = std::bit_cast<float>(pattern);
    const int bit = int(rng.next_below(32));
    const float twice = flip_bit(flip_bit(x, bit), bit);
    CHECK(std::bit_cast<uint32_t>(twice) == pattern);
  }
}

TEST_CASE("sampling is deterministic in (seed, trial) and decorrelated across trials") {
  const ModelGraph m = fgtest::tiny_cnn(31);
  FaultSpec spec;
  spec.n_flips = 4;
  spec.campaign_seed = 77;
  const FaultRealization a = sample_realization(spec, m, 5);
  const FaultRealization b = sample_realization(spec, m, 5);
  REQUIRE(a.flips.size() == 4);
  for (size_t i = 0; i < a.flips.size(); ++i) {
    CHECK(a.flips[i].layer_id == b.flips[i].layer_id);
    CHECK(a.flips[i].element == b.flips[i].element);
    CHECK(a.flips[i].bit == b.flips[i].bit);
  }
  const FaultRealization c = sample_realization(spec, m, 6);
  bool differs = false;
  for (size_t i = 0; i < a.flips.size(); ++i) {
    if (a.flips[i].element != c.flips[i].element || a.flips[i].bit != c.flips[i].bit)
      differs = true;
  }
  CHECK(differs);
}

TEST_CASE("n_flips=0 gives an empty realization") {
  const ModelGraph m = fgtest::tiny_cnn(32);
  FaultSpec spec;
  spec.n_flips = 0;
  CHECK(sample_realization(spec, m, 0).flips.empty());
}

TEST_CASE("exhausting the slot space flips every slot exactly once") {
  ModelGraph m;
  m.name = "micro";
  m.input_shape = {2};
  m.layers.push_back(LayerSpec::fully_connected(2, 2));
  init_weights(m, 1);

  FaultSpec spec;
  spec.bit_lo = 0;
  spec.bit_hi = 1;           // 2 elements x 2 bits = 4 slots
  spec.n_flips = 4;
  const FaultRealization r = sample_realization(spec, m, 3);
  std::set<std::pair<int64_t, int>> seen;
  for (const FlipSite& site : r.flips) seen.insert({site.element, site.bit});
  CHECK(seen.size() == 4);

  spec.n_flips = 5;
  CHECK_THROWS_AS(sample_realization(spec, m, 3), SpecError);
}

TEST_CASE("an empty realization leaves the forward pass bit-identical") {
  const ModelGraph m = fgtest::tiny_cnn(33);
  SplitMix64 rng(1);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  OpCount c1, c2;
  const Tensor clean = forward(m, x, c1);
  FaultRealization empty;
  CHECK(faulty_forward(m, x, empty, c2).same_bits(clean));
}

TEST_CASE("model weights hash identically before and after campaigns in both modes") {
  const ModelGraph m = fgtest::tiny_cnn(34);
  const uint64_t before = m.weights_hash();
  SplitMix64 rng(2);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  for (const FaultTarget target : {FaultTarget::LayerOutputs, FaultTarget::Weights}) {
    FaultSpec spec;
    spec.n_flips = 3;
    spec.target = target;
    spec.campaign_seed = 11;
    for (uint64_t trial = 0; trial < 20; ++trial) {
      OpCount c;
      faulty_forward(m, x, sample_realization(spec, m, trial), c);
    }
  }
  CHECK(m.weights_hash() == before);
}

TEST_CASE("a sign flip on the winning logit flips a 2-class prediction") {
  // bias-only model: zero weights, biases pick class 1
  ModelGraph m;
  m.name = "bias";
  m.input_shape = {2};
  m.layers.push_back(LayerSpec::fully_connected(2, 2));
  m.layers.back().bias.data = {1.0f, 2.0f};

  SplitMix64 rng(3);
  const Tensor x = fgtest::random_tensor({2}, rng);
  OpCount c;
  CHECK(argmax_class(forward(m, x, c)) == 1);

  FaultRealization real;
  real.flips.push_back({0, 1, 31});  // sign of the winning logit
  OpCount c2;
  const Tensor faulty = faulty_forward(m, x, real, c2);
  CHECK(argmax_class(faulty) == 0);
}

TEST_CASE("a bit-30 flip mid-layer still completes and yields an argmax") {
  const ModelGraph m = fgtest::tiny_cnn(35);
  SplitMix64 rng(4);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  FaultRealization real;
  real.flips.push_back({0, 7, 30});  // conv output, exponent bit
  OpCount c;
  const Tensor logits = faulty_forward(m, x, real, c);
  const int cls = argmax_class(logits);
  CHECK(cls >= 0);
  CHECK(cls < 4);
}

TEST_CASE("weights-mode flips perturb the pass without touching the model") {
  const ModelGraph m = fgtest::tiny_cnn(36);
  SplitMix64 rng(5);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  OpCount c1, c2;
  const Tensor clean = forward(m, x, c1);

  FaultRealization real;
  real.target = FaultTarget::Weights;
  real.flips.push_back({0, 3, 30});
  const Tensor faulty = faulty_forward(m, x, real, c2);
  CHECK_FALSE(faulty.same_bits(clean));

  OpCount c3;
  CHECK(forward(m, x, c3).same_bits(clean));
}

TEST_CASE("stale realizations out of bounds raise ConsistencyError") {
  const ModelGraph m = fgtest::tiny_cnn(37);
  SplitMix64 rng(6);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  FaultRealization real;
  real.flips.push_back({0, 1 << 20, 3});
  OpCount c;
  CHECK_THROWS_AS(faulty_forward(m, x, real, c), ConsistencyError);
}

TEST_CASE("eligible layers must be injectable") {
  const ModelGraph m = fgtest::tiny_cnn(38);
  FaultSpec spec;
  spec.eligible_layers = {1};  // relu
  CHECK_THROWS_AS(spec.validate(m), SpecError);
}
