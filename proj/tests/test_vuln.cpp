#include <doctest.h>

#include <algorithm>

#include "faultguard/errors.hpp"
#include "faultguard/nn.hpp"
#include "faultguard/vuln.hpp"
#include "test_util.hpp"

using namespace fg;

namespace {

VulnRecord rec(int node_id, double vulnerability) {
  VulnRecord r;
  r.input_id = 0;
  r.node_id = node_id;
  r.n_flips = 1;
  r.trials = 10;
  r.vulnerability = vulnerability;
  return r;
}

}  // namespace

TEST_CASE("vulnerability is clean correctness minus the faulty rate") {
  CHECK(vuln_from_counts(1, 6, 10) == doctest::Approx(0.4));
  CHECK(vuln_from_counts(0, 5, 10) == doctest::Approx(-0.5));  // faults can fix an input
  CHECK(vuln_from_counts(1, 10, 10) == 0.0);
  CHECK_THROWS_AS(vuln_from_counts(1, 0, 0), InputError);
}

TEST_CASE("n_flips=0 profiles to exactly zero vulnerability") {
  const ModelGraph m = fgtest::tiny_cnn(61);
  SplitMix64 rng(61);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  OpCount c;
  const int label = argmax_class(forward(m, x, c));
  FaultSpec spec;
  spec.n_flips = 0;
  const VulnRecord r = profile_input(m, 3, x, label, spec, 5);
  CHECK(r.vulnerability == 0.0);
  CHECK(r.clean_correct == 1);
  CHECK(r.faulty_rate == 1.0);
  CHECK(r.node_id == 0);
}

TEST_CASE("identical seeds give identical records, different seeds usually differ") {
  const ModelGraph m = fgtest::tiny_cnn(62);
  SplitMix64 rng(62);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  FaultSpec spec;
  spec.n_flips = 3;
  spec.campaign_seed = 5;
  const VulnRecord a = profile_input(m, 7, x, 2, spec, 10);
  const VulnRecord b = profile_input(m, 7, x, 2, spec, 10);
  CHECK(a.faulty_rate == b.faulty_rate);
  CHECK(a.vulnerability == b.vulnerability);
}

TEST_CASE("a dead layer profiles to exactly zero vulnerability") {
  // conv (zero weights) -> relu -> fc with zero weights and a fixed bias:
  // logits are constant no matter what single-bit flips hit the dead conv
  ModelGraph m;
  m.name = "dead";
  m.input_shape = {1, 6, 6};
  m.layers.push_back(LayerSpec::conv2d(1, 2, 3));
  m.layers.push_back(LayerSpec::relu());
  m.layers.push_back(LayerSpec::fully_connected(2 * 4 * 4, 3));
  m.layers[2].bias.data = {0.1f, 0.9f, 0.2f};
  m.validate();

  SplitMix64 rng(63);
  const Tensor x = fgtest::random_tensor({1, 6, 6}, rng, 0.0f, 1.0f);
  FaultSpec spec;
  spec.n_flips = 2;
  spec.campaign_seed = 17;
  const VulnRecord r = profile_layer(m, 0, x, 1, 0, spec, 20);
  CHECK(r.node_id == 1);
  CHECK(r.clean_correct == 1);
  CHECK(r.vulnerability == 0.0);
}

TEST_CASE("profiling refuses non-injectable layers") {
  const ModelGraph m = fgtest::tiny_cnn(64);
  SplitMix64 rng(64);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  FaultSpec spec;
  CHECK_THROWS_AS(profile_layer(m, 0, x, 0, 1, spec, 5), SpecError);  // relu
}

TEST_CASE("profiling does not mutate the model weights") {
  const ModelGraph m = fgtest::tiny_cnn(65);
  const uint64_t before = m.weights_hash();
  SplitMix64 rng(65);
  const Tensor x = fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f);
  FaultSpec spec;
  spec.n_flips = 4;
  profile_input(m, 0, x, 1, spec, 10);
  profile_layer(m, 0, x, 1, 0, spec, 10);
  CHECK(m.weights_hash() == before);
}

TEST_CASE("assign_labels ranks the example scores to [0,1,0,1]") {
  std::vector<VulnRecord> records{rec(0, 0.05), rec(1, 0.4), rec(2, 0.1), rec(3, 0.7)};
  const auto labels = assign_labels(records, 2, 0.5);
  REQUIRE(labels.size() == 4);
  CHECK(labels[0].cls == 0);
  CHECK(labels[1].cls == 1);
  CHECK(labels[2].cls == 0);
  CHECK(labels[3].cls == 1);
}

TEST_CASE("tied scores break deterministically by node id") {
  std::vector<VulnRecord> records{rec(3, 0.2), rec(1, 0.2), rec(0, 0.2), rec(2, 0.2)};
  const auto labels = assign_labels(records, 2, 0.5);
  CHECK(labels[0].node_id == 0);
  CHECK(labels[0].cls == 1);
  CHECK(labels[1].cls == 1);
  CHECK(labels[2].cls == 0);
  CHECK(labels[3].cls == 0);
}

TEST_CASE("six scores in three-level mode give two nodes per tertile") {
  std::vector<VulnRecord> records;
  for (int i = 0; i < 6; ++i) records.push_back(rec(i, 0.1 * i));
  const auto labels = assign_labels(records, 3, 0.5);
  // descending scores: nodes 5,4 high; 3,2 moderate; 1,0 low
  CHECK(labels[5].cls == 2);
  CHECK(labels[4].cls == 2);
  CHECK(labels[3].cls == 1);
  CHECK(labels[2].cls == 1);
  CHECK(labels[1].cls == 0);
  CHECK(labels[0].cls == 0);
}

TEST_CASE("labels are a pure function of the record multiset") {
  std::vector<VulnRecord> records{rec(0, 0.3), rec(1, 0.8), rec(2, -0.1), rec(3, 0.5)};
  auto shuffled = records;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto a = assign_labels(records, 2, 0.5);
  const auto b = assign_labels(shuffled, 2, 0.5);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].node_id == b[i].node_id);
    CHECK(a[i].cls == b[i].cls);
  }
}

TEST_CASE("assign_labels rejects empty or undersized record sets") {
  CHECK_THROWS_AS(assign_labels({}, 2, 0.5), InputError);
  CHECK_THROWS_AS(assign_labels({rec(0, 0.1), rec(1, 0.2)}, 3, 0.5), InputError);
}

TEST_CASE("static ranking of a single input equals that input's layer scores") {
  std::vector<VulnRecord> records{rec(1, 0.3), rec(2, 0.9), rec(3, 0.1), rec(0, 0.99)};
  const auto ranking = static_layer_ranking(records);
  REQUIRE(ranking.size() == 3);  // the input node is excluded
  CHECK(ranking[0].first == 2);
  CHECK(ranking[0].second == doctest::Approx(0.9));
  CHECK(ranking[1].first == 1);
  CHECK(ranking[2].first == 3);
}

TEST_CASE("opposed orderings average to a tie broken by node id") {
  std::vector<VulnRecord> records;
  auto with_input = [](int64_t input_id, int node_id, double v) {
    VulnRecord r = rec(node_id, v);
    r.input_id = input_id;
    return r;
  };
  records.push_back(with_input(0, 1, 0.8));
  records.push_back(with_input(0, 2, 0.2));
  records.push_back(with_input(1, 1, 0.2));
  records.push_back(with_input(1, 2, 0.8));
  const auto ranking = static_layer_ranking(records);
  CHECK(ranking[0].first == 1);
  CHECK(ranking[0].second == doctest::Approx(0.5));
  CHECK(ranking[1].first == 2);
}

TEST_CASE("mean vulnerability is non-decreasing in n_flips over the {1,2,4,8} grid") {
  const ModelGraph m = fgtest::tiny_cnn(66);
  SplitMix64 rng(66);
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    inputs.push_back(fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f));
    OpCount c;
    labels.push_back(argmax_class(forward(m, inputs.back(), c)));
  }

  const std::vector<int> grid{1, 2, 4, 8};
  std::vector<double> means;
  for (int nf : grid) {
    FaultSpec spec;
    spec.n_flips = nf;
    spec.campaign_seed = 123;  // paired seeds across grid points
    double total = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i)
      total += profile_input(m, int64_t(i), inputs[i], labels[i], spec, 16).vulnerability;
    means.push_back(total / double(inputs.size()));
  }

  int inversions = 0;
  int pairs = 0;
  for (size_t i = 0; i + 1 < means.size(); ++i) {
    ++pairs;
    if (means[i + 1] < means[i]) ++inversions;
  }
  const int budget = (pairs + 9) / 10;  // one inversion per ten grid pairs
  CHECK(inversions <= budget);
}
