#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fg {

/// Dense row-major single-precision array. The one numeric carrier for
/// inputs, weights and activations; bit-flip semantics are defined on the
/// 32-bit words behind `data`.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<int64_t> s, std::vector<float> d);

  static Tensor zeros(std::vector<int64_t> s);
  static Tensor full(std::vector<int64_t> s, float value);

  /// Product of dims; throws ShapeError on empty or non-positive dims.
  static int64_t shape_numel(const std::vector<int64_t>& s);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }

  // 2-d matrix accessors (for GEMM operands)
  int64_t rows() const;
  int64_t cols() const;
  float at2(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * cols() + j)]; }
  float& at2(int64_t i, int64_t j) { return data[static_cast<size_t>(i * cols() + j)]; }

  /// data length must equal the shape product.
  void check() const;

  bool same_bits(const Tensor& other) const;
};

std::string shape_str(const std::vector<int64_t>& s);

struct LayerOps {
  int64_t adds = 0;
  int64_t muls = 0;
};

/// Exact add/multiply ledger, additive across layers and runs. layer_id -1
/// buckets work not attributable to a model layer.
struct OpCount {
  int64_t adds = 0;
  int64_t muls = 0;
  std::map<int, LayerOps> per_layer;

  void record(int layer_id, int64_t a, int64_t m) {
    adds += a;
    muls += m;
    auto& slot = per_layer[layer_id];
    slot.adds += a;
    slot.muls += m;
  }

  void merge(const OpCount& o) {
    adds += o.adds;
    muls += o.muls;
    for (const auto& [id, ops] : o.per_layer) {
      auto& slot = per_layer[id];
      slot.adds += ops.adds;
      slot.muls += ops.muls;
    }
  }

  int64_t total() const { return adds + muls; }
};

}  // namespace fg
