#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "faultguard/layers.hpp"
#include "faultguard/tensor.hpp"

namespace fg {

/// Node kinds carried as a one-hot tag after the downsampled features.
enum class NodeKind { Input = 0, Conv = 1, Pool = 2, Fc = 3, Other = 4 };
constexpr int kNodeKindSlots = 5;

NodeKind node_kind_of(LayerKind k);

/// Per-input computation graph. Node 0 is the input image; nodes 1..N-1 are
/// the model layers in chain order. Feature width D = d + 5 (kind tag).
struct GraphSample {
  int64_t input_id = -1;
  std::vector<std::vector<double>> node_features;  // N x D
  std::vector<std::vector<uint8_t>> adjacency;     // N x N, symmetric, zero diagonal
  std::vector<int> labels;                         // per node, -1 = unlabeled

  size_t num_nodes() const { return node_features.size(); }
  size_t feature_dim() const { return node_features.empty() ? 0 : node_features[0].size(); }
  void check() const;
  std::vector<int> neighbors(size_t v) const;
};

/// Chunk means with floor boundaries: chunk i covers
/// [floor(i*L/d), floor((i+1)*L/d)); empty chunks give 0.
std::vector<double> chunk_means(std::span<const float> values, int d);

/// chunk_means followed by scaling the vector by 1/max_abs (no-op when
/// max_abs is 0).
std::vector<double> downsample(std::span<const float> values, int d);

/// Node 0 carries the downsampled input, layer nodes their downsampled
/// weights (zero vector for parameter-free layers); edges join consecutive
/// chain elements.
GraphSample build_graph(const ModelGraph& model, const Tensor& input, int d = 64);

}  // namespace fg
