// Packs per-class digit dumps (0.json .. 9.json, each {"data": [v0, v1, ...]}
// with 784 values per 28x28 image, pixels scaled to [0,1]) into the standard
// IDX pair format, with a seeded shuffle and train/test split. Used to
// assemble the bundled study dataset; works on any dump with the same layout.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "faultguard/dataset.hpp"
#include "faultguard/rng.hpp"
#include "faultguard/tensor.hpp"

namespace fs = std::filesystem;
using namespace fg;

int main(int argc, char** argv) {
  CLI::App app{"pack per-class digit JSON dumps into IDX train/test files"};
  std::string in_dir, out_dir;
  int train_count = 8000;
  uint64_t seed = 42;
  app.add_option("--in", in_dir, "directory holding 0.json .. 9.json")->required();
  app.add_option("--out", out_dir, "output directory for the IDX files")->required();
  app.add_option("--train", train_count, "number of training samples");
  app.add_option("--seed", seed, "shuffle seed");
  CLI11_PARSE(app, argc, argv);

  std::vector<std::pair<std::vector<float>, int>> samples;
  for (int digit = 0; digit <= 9; ++digit) {
    const fs::path path = fs::path(in_dir) / (std::to_string(digit) + ".json");
    std::ifstream f(path);
    if (!f) {
      std::cerr << "cannot open " << path << "\n";
      return 1;
    }
    nlohmann::json j;
    f >> j;
    const auto& flat = j.at("data");
    if (flat.size() % 784 != 0) {
      std::cerr << path << ": length " << flat.size() << " is not a multiple of 784\n";
      return 1;
    }
    const size_t count = flat.size() / 784;
    for (size_t i = 0; i < count; ++i) {
      std::vector<float> pixels(784);
      for (size_t p = 0; p < 784; ++p)
        pixels[p] = flat[i * 784 + p].get<float>();
      samples.emplace_back(std::move(pixels), digit);
    }
  }
  std::cout << "loaded " << samples.size() << " samples\n";
  if (train_count <= 0 || static_cast<size_t>(train_count) >= samples.size()) {
    std::cerr << "--train must split the dataset into two non-empty parts\n";
    return 1;
  }

  SplitMix64 rng(seed);
  rng.shuffle(samples);

  fs::create_directories(out_dir);
  auto write_split = [&](size_t begin, size_t end, const std::string& stem) {
    DatasetView view;
    view.split = stem;
    for (size_t i = begin; i < end; ++i) {
      Tensor img = Tensor::zeros({1, 28, 28});
      img.data = samples[i].first;
      view.images.push_back(std::move(img));
      view.labels.push_back(samples[i].second);
    }
    const std::string images = out_dir + "/" + stem + "-images-idx3-ubyte";
    const std::string labels = out_dir + "/" + stem + "-labels-idx1-ubyte";
    save_idx(view, images, labels);
    std::cout << "wrote " << view.size() << " samples to " << images << "\n";
  };
  write_split(0, static_cast<size_t>(train_count), "train");
  write_split(static_cast<size_t>(train_count), samples.size(), "t10k");
  return 0;
}
