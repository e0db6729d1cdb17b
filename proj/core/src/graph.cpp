#include "faultguard/graph.hpp"

#include <algorithm>
#include <cmath>

#include "faultguard/errors.hpp"

namespace fg {

NodeKind node_kind_of(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return NodeKind::Conv;
    case LayerKind::MaxPool2D: return NodeKind::Pool;
    case LayerKind::FullyConnected: return NodeKind::Fc;
    default: return NodeKind::Other;
  }
}

void GraphSample::check() const {
  const size_t n = num_nodes();
  if (adjacency.size() != n) throw ShapeError("adjacency size does not match node count");
  const size_t d = feature_dim();
  for (const auto& row : node_features) {
    if (row.size() != d) throw ShapeError("ragged node feature matrix");
  }
  for (size_t i = 0; i < n; ++i) {
    if (adjacency[i].size() != n) throw ShapeError("adjacency is not square");
    if (adjacency[i][i] != 0) throw ShapeError("adjacency diagonal must be zero");
    for (size_t j = 0; j < n; ++j) {
      if (adjacency[i][j] > 1) throw ShapeError("adjacency entries must be 0/1");
      if (adjacency[i][j] != adjacency[j][i]) throw ShapeError("adjacency must be symmetric");
    }
  }
  if (!labels.empty() && labels.size() != n)
    throw ShapeError("label vector does not match node count");
}

std::vector<int> GraphSample::neighbors(size_t v) const {
  std::vector<int> out;
  for (size_t u = 0; u < num_nodes(); ++u) {
    if (adjacency[v][u]) out.push_back(static_cast<int>(u));
  }
  return out;
}

std::vector<double> chunk_means(std::span<const float> values, int d) {
  if (d < 1) throw InputError("downsample target length must be >= 1");
  const int64_t len = static_cast<int64_t>(values.size());
  std::vector<double> out(static_cast<size_t>(d), 0.0);
  for (int i = 0; i < d; ++i) {
    const int64_t lo = (static_cast<int64_t>(i) * len) / d;
    const int64_t hi = (static_cast<int64_t>(i + 1) * len) / d;
    if (hi <= lo) continue;  // empty chunk stays 0
    double sum = 0.0;
    for (int64_t t = lo; t < hi; ++t) sum += static_cast<double>(values[static_cast<size_t>(t)]);
    out[static_cast<size_t>(i)] = sum / static_cast<double>(hi - lo);
  }
  return out;
}

std::vector<double> downsample(std::span<const float> values, int d) {
  std::vector<double> out = chunk_means(values, d);
  double max_abs = 0.0;
  for (double v : out) max_abs = std::max(max_abs, std::fabs(v));
  if (max_abs > 0.0) {
    for (double& v : out) v /= max_abs;
  }
  return out;
}

GraphSample build_graph(const ModelGraph& model, const Tensor& input, int d) {
  const size_t n = model.layers.size() + 1;
  GraphSample g;
  g.node_features.assign(n, std::vector<double>(static_cast<size_t>(d) + kNodeKindSlots, 0.0));
  g.adjacency.assign(n, std::vector<uint8_t>(n, 0));
  g.labels.assign(n, -1);

  auto fill = [&](size_t node, std::span<const float> values, NodeKind kind) {
    auto& row = g.node_features[node];
    if (!values.empty()) {
      const std::vector<double> feats = downsample(values, d);
      for (int i = 0; i < d; ++i) row[static_cast<size_t>(i)] = feats[static_cast<size_t>(i)];
    }
    row[static_cast<size_t>(d) + static_cast<size_t>(kind)] = 1.0;
  };

  fill(0, std::span<const float>(input.data), NodeKind::Input);
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    std::span<const float> values;
    if (layer.has_params()) values = std::span<const float>(layer.weight.data);
    fill(i + 1, values, node_kind_of(layer.kind));
  }
  for (size_t i = 0; i + 1 < n; ++i) {
    g.adjacency[i][i + 1] = 1;
    g.adjacency[i + 1][i] = 1;
  }
  g.check();
  return g;
}

}  // namespace fg
