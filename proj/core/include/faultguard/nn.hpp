#pragma once

#include <functional>

#include "faultguard/layers.hpp"
#include "faultguard/tensor.hpp"

namespace fg {

/// C = A * B with the summation order pinned to ascending k per element, so
/// results replay bit-for-bit across protection modes. Charges m*n*k muls
/// and m*n*(k-1) adds to `counter` under `layer_id`.
Tensor gemm(const Tensor& a, const Tensor& b, OpCount& counter, int layer_id = -1);

/// Raw kernel behind gemm(); C must hold m*n floats.
void gemm_raw(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);

/// One output element, same ascending-k order as gemm_raw.
float gemm_cell(const float* a, const float* b, int64_t k, int64_t n, int64_t i, int64_t j);

/// Patch matrix [in_ch*k*k, oh*ow]; column p is the receptive field of
/// output position p. Pure data movement, no ops charged.
Tensor im2col(const Tensor& input, int64_t kernel, int64_t stride);

/// im2col + gemm + bias. Output is [out_ch, oh, ow].
Tensor conv2d_forward(const Tensor& input, const LayerSpec& spec, OpCount& counter,
                      int layer_id = -1);

Tensor maxpool2d_forward(const Tensor& input, const LayerSpec& spec);
Tensor fully_connected_forward(const Tensor& input, const LayerSpec& spec, OpCount& counter,
                               int layer_id = -1);
Tensor relu_forward(const Tensor& input);
Tensor softmax_forward(const Tensor& input);

/// Observes/replaces a Conv2D or FullyConnected layer's output before the
/// next layer consumes it. layer_id is the index into model.layers.
using LayerHook = std::function<void(int layer_id, Tensor& out)>;

/// Full chain evaluation; deterministic given (weights, input).
Tensor forward(const ModelGraph& model, const Tensor& input, OpCount& counter,
               const LayerHook& hook = {});

/// Closed-form per-layer op counts; equals the counter accumulated by a
/// real forward pass.
OpCount count_static_macs(const ModelGraph& model);

/// Top-1 class. NaN logits are treated as -inf (never selected); ties break
/// to the lowest class index.
int argmax_class(const Tensor& logits);

}  // namespace fg
