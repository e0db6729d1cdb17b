#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faultguard/tensor.hpp"

namespace fg {

enum class LayerKind { Conv2D, MaxPool2D, ReLU, Flatten, FullyConnected, Softmax };

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

/// One layer of a chain model. Conv2D weights are [out_ch, in_ch, k, k],
/// FullyConnected weights are [out, in]; parameter-free kinds leave the
/// weight/bias tensors empty.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;

  // Conv2D / MaxPool2D
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t kernel = 0;
  int64_t stride = 1;

  // FullyConnected
  int64_t in_features = 0;
  int64_t out_features = 0;

  Tensor weight;
  Tensor bias;

  static LayerSpec conv2d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride = 1);
  static LayerSpec maxpool2d(int64_t kernel, int64_t stride);
  static LayerSpec relu();
  static LayerSpec flatten();
  static LayerSpec fully_connected(int64_t in, int64_t out);
  static LayerSpec softmax();

  bool has_params() const {
    return kind == LayerKind::Conv2D || kind == LayerKind::FullyConnected;
  }

  /// Output shape as a total function of the input shape; throws ShapeError
  /// when the input is incompatible (wrong rank, kernel larger than input).
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const;

  /// Validates weight/bias shapes against the declared parameters.
  void check_params() const;
};

/// Ordered chain of layers plus the input shape. Both the inference target
/// and the source for graph construction.
struct ModelGraph {
  std::string name;
  std::vector<int64_t> input_shape;
  std::vector<LayerSpec> layers;

  /// Shape-checks the whole chain; throws ShapeError on any break.
  void validate() const;

  /// Per-layer output shapes (layer i consumes shape i-1's entry).
  std::vector<std::vector<int64_t>> layer_shapes() const;

  /// Indices of layers eligible for injection/protection (Conv2D, FullyConnected).
  std::vector<int> injectable_layers() const;

  /// FNV-1a over all weight/bias bytes, for never-mutated checks.
  uint64_t weights_hash() const;
};

/// The classic 28x28 LeNet-style stack: two conv/pool blocks and three FC
/// layers, 281640 multiply-accumulates per forward pass. Weights are
/// Glorot-uniform from `seed`.
ModelGraph make_lenet(uint64_t seed);

/// Fills every parameterized layer with Glorot-uniform values from `seed`.
void init_weights(ModelGraph& model, uint64_t seed);

}  // namespace fg
