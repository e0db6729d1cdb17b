#include "faultguard/layers.hpp"

#include <cmath>

#include "faultguard/errors.hpp"
#include "faultguard/rng.hpp"

namespace fg {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::MaxPool2D: return "maxpool2d";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::FullyConnected: return "fully_connected";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv2d") return LayerKind::Conv2D;
  if (name == "maxpool2d") return LayerKind::MaxPool2D;
  if (name == "relu") return LayerKind::ReLU;
  if (name == "flatten") return LayerKind::Flatten;
  if (name == "fully_connected") return LayerKind::FullyConnected;
  if (name == "softmax") return LayerKind::Softmax;
  throw FormatError("unknown layer kind: " + name);
}

LayerSpec LayerSpec::conv2d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride) {
  LayerSpec s;
  s.kind = LayerKind::Conv2D;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.weight = Tensor::zeros({out_ch, in_ch, kernel, kernel});
  s.bias = Tensor::zeros({out_ch});
  return s;
}

LayerSpec LayerSpec::maxpool2d(int64_t kernel, int64_t stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool2D;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::ReLU;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}

LayerSpec LayerSpec::fully_connected(int64_t in, int64_t out) {
  LayerSpec s;
  s.kind = LayerKind::FullyConnected;
  s.in_features = in;
  s.out_features = out;
  s.weight = Tensor::zeros({out, in});
  s.bias = Tensor::zeros({out});
  return s;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec s;
  s.kind = LayerKind::Softmax;
  return s;
}

static int64_t conv_out_dim(int64_t in, int64_t kernel, int64_t stride) {
  return (in - kernel) / stride + 1;
}

std::vector<int64_t> LayerSpec::output_shape(const std::vector<int64_t>& in) const {
  switch (kind) {
    case LayerKind::Conv2D: {
      if (in.size() != 3) throw ShapeError("conv2d expects [C,H,W] input, got " + shape_str(in));
      if (in[0] != in_channels)
        throw ShapeError("conv2d expects " + std::to_string(in_channels) +
                         " input channels, got " + std::to_string(in[0]));
      if (in[1] < kernel || in[2] < kernel)
        throw ShapeError("conv2d kernel " + std::to_string(kernel) +
                         " larger than input " + shape_str(in));
      return {out_channels, conv_out_dim(in[1], kernel, stride), conv_out_dim(in[2], kernel, stride)};
    }
    case LayerKind::MaxPool2D: {
      if (in.size() != 3) throw ShapeError("maxpool2d expects [C,H,W] input, got " + shape_str(in));
      if (in[1] < kernel || in[2] < kernel)
        throw ShapeError("maxpool2d kernel " + std::to_string(kernel) +
                         " larger than input " + shape_str(in));
      return {in[0], conv_out_dim(in[1], kernel, stride), conv_out_dim(in[2], kernel, stride)};
    }
    case LayerKind::ReLU:
    case LayerKind::Softmax:
      return in;
    case LayerKind::Flatten:
      return {Tensor::shape_numel(in)};
    case LayerKind::FullyConnected: {
      // non-flat inputs are consumed row-major (implicit flatten)
      if (Tensor::shape_numel(in) != in_features)
        throw ShapeError("fully_connected expects " + std::to_string(in_features) +
                         " features, got " + shape_str(in));
      return {out_features};
    }
  }
  throw ShapeError("unreachable layer kind");
}

void LayerSpec::check_params() const {
  if (kind == LayerKind::Conv2D) {
    const std::vector<int64_t> want{out_channels, in_channels, kernel, kernel};
    if (weight.shape != want)
      throw ShapeError("conv2d weight shape " + shape_str(weight.shape) +
                       ", expected " + shape_str(want));
    if (bias.shape != std::vector<int64_t>{out_channels})
      throw ShapeError("conv2d bias shape " + shape_str(bias.shape));
  } else if (kind == LayerKind::FullyConnected) {
    const std::vector<int64_t> want{out_features, in_features};
    if (weight.shape != want)
      throw ShapeError("fully_connected weight shape " + shape_str(weight.shape) +
                       ", expected " + shape_str(want));
    if (bias.shape != std::vector<int64_t>{out_features})
      throw ShapeError("fully_connected bias shape " + shape_str(bias.shape));
  }
}

void ModelGraph::validate() const {
  std::vector<int64_t> cur = input_shape;
  Tensor::shape_numel(cur);
  for (const auto& layer : layers) {
    layer.check_params();
    cur = layer.output_shape(cur);
  }
}

std::vector<std::vector<int64_t>> ModelGraph::layer_shapes() const {
  std::vector<std::vector<int64_t>> out;
  out.reserve(layers.size());
  std::vector<int64_t> cur = input_shape;
  for (const auto& layer : layers) {
    cur = layer.output_shape(cur);
    out.push_back(cur);
  }
  return out;
}

std::vector<int> ModelGraph::injectable_layers() const {
  std::vector<int> ids;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_params()) ids.push_back(static_cast<int>(i));
  }
  return ids;
}

uint64_t ModelGraph::weights_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& layer : layers) {
    if (!layer.weight.data.empty())
      h = fnv1a64(layer.weight.data.data(), layer.weight.data.size() * sizeof(float), h);
    if (!layer.bias.data.empty())
      h = fnv1a64(layer.bias.data.data(), layer.bias.data.size() * sizeof(float), h);
  }
  return h;
}

void init_weights(ModelGraph& model, uint64_t seed) {
  SplitMix64 rng(seed_mix({seed, 0x77e1u}));
  for (auto& layer : model.layers) {
    if (!layer.has_params()) continue;
    int64_t fan_in = 0, fan_out = 0;
    if (layer.kind == LayerKind::Conv2D) {
      fan_in = layer.in_channels * layer.kernel * layer.kernel;
      fan_out = layer.out_channels * layer.kernel * layer.kernel;
    } else {
      fan_in = layer.in_features;
      fan_out = layer.out_features;
    }
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (float& w : layer.weight.data) w = static_cast<float>(rng.next_uniform(-a, a));
    for (float& b : layer.bias.data) b = 0.0f;
  }
}

ModelGraph make_lenet(uint64_t seed) {
  ModelGraph m;
  m.name = "lenet";
  m.input_shape = {1, 28, 28};
  m.layers.push_back(LayerSpec::conv2d(1, 6, 5));
  m.layers.push_back(LayerSpec::relu());
  m.layers.push_back(LayerSpec::maxpool2d(2, 2));
  m.layers.push_back(LayerSpec::conv2d(6, 16, 5));
  m.layers.push_back(LayerSpec::relu());
  m.layers.push_back(LayerSpec::maxpool2d(2, 2));
  m.layers.push_back(LayerSpec::fully_connected(256, 120));
  m.layers.push_back(LayerSpec::relu());
  m.layers.push_back(LayerSpec::fully_connected(120, 84));
  m.layers.push_back(LayerSpec::relu());
  m.layers.push_back(LayerSpec::fully_connected(84, 10));
  init_weights(m, seed);
  m.validate();
  return m;
}

}  // namespace fg
