#include <doctest.h>

#include "faultguard/errors.hpp"
#include "faultguard/train.hpp"
#include "test_util.hpp"

using namespace fg;

namespace {

DatasetView tiny_dataset(size_t n, uint64_t seed, int classes = 4) {
  DatasetView d;
  d.num_classes = classes;
  SplitMix64 rng(seed);
  for (size_t i = 0; i < n; ++i) {
    d.images.push_back(fgtest::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f));
    d.labels.push_back(int(rng.next_below(uint64_t(classes))));
  }
  return d;
}

}  // namespace

TEST_CASE("lr=0 leaves the weights unchanged") {
  const ModelGraph init = fgtest::tiny_cnn(21);
  const DatasetView data = tiny_dataset(10, 1);
  TrainConfig cfg;
  cfg.lr = 0.0f;
  cfg.epochs = 2;
  cfg.batch = 4;
  const TrainResult r = train_target(init, data, nullptr, cfg);
  CHECK(r.model.weights_hash() == init.weights_hash());
}

TEST_CASE("one epoch on a 10-sample set reduces the training cross-entropy") {
  const ModelGraph init = fgtest::tiny_cnn(22);
  const DatasetView data = tiny_dataset(10, 2);
  const double before = mean_cross_entropy(init, data);
  TrainConfig cfg;
  cfg.lr = 0.05f;
  cfg.epochs = 1;
  cfg.batch = 5;
  cfg.seed = 7;
  const TrainResult r = train_target(init, data, nullptr, cfg);
  const double after = mean_cross_entropy(r.model, data);
  CHECK(after < before);
}

TEST_CASE("training is deterministic given the seed") {
  const ModelGraph init = fgtest::tiny_cnn(23);
  const DatasetView data = tiny_dataset(12, 3);
  TrainConfig cfg;
  cfg.lr = 0.05f;
  cfg.epochs = 2;
  cfg.batch = 4;
  cfg.seed = 9;
  const TrainResult a = train_target(init, data, nullptr, cfg);
  const TrainResult b = train_target(init, data, nullptr, cfg);
  CHECK(a.model.weights_hash() == b.model.weights_hash());
  CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("a diverging run raises TrainingError naming the epoch") {
  const ModelGraph init = fgtest::tiny_cnn(24);
  const DatasetView data = tiny_dataset(10, 4);
  TrainConfig cfg;
  cfg.lr = 1e20f;  // guaranteed blow-up
  cfg.epochs = 3;
  cfg.batch = 10;
  CHECK_THROWS_WITH_AS(static_cast<void>(train_target(init, data, nullptr, cfg)),
                       doctest::Contains("epoch"), TrainingError);
}

TEST_CASE("empty dataset and bad labels are rejected") {
  const ModelGraph init = fgtest::tiny_cnn(25);
  TrainConfig cfg;
  CHECK_THROWS_AS(static_cast<void>(train_target(init, DatasetView{}, nullptr, cfg)),
                  TrainingError);
  DatasetView bad = tiny_dataset(3, 5);
  bad.labels[1] = 99;
  CHECK_THROWS_AS(static_cast<void>(train_target(init, bad, nullptr, cfg)), TrainingError);
}
