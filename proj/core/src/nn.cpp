#include "faultguard/nn.hpp"

#include <cmath>
#include <limits>

#include "faultguard/errors.hpp"

namespace fg {

void gemm_raw(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
  // Identical per-element summation order to the naive i,j,t loop (ascending
  // t, accumulator seeded with the t=0 product), but walks B row-wise.
  for (int64_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    const float a0 = arow[0];
    const float* brow = b;
    for (int64_t j = 0; j < n; ++j) crow[j] = a0 * brow[j];
    for (int64_t t = 1; t < k; ++t) {
      const float at = arow[t];
      brow = b + t * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += at * brow[j];
    }
  }
}

float gemm_cell(const float* a, const float* b, int64_t k, int64_t n, int64_t i, int64_t j) {
  const float* arow = a + i * k;
  float acc = arow[0] * b[j];
  for (int64_t t = 1; t < k; ++t) acc += arow[t] * b[t * n + j];
  return acc;
}

Tensor gemm(const Tensor& a, const Tensor& b, OpCount& counter, int layer_id) {
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw ShapeError("gemm inner dimensions disagree: " + shape_str(a.shape) + " x " +
                     shape_str(b.shape));
  Tensor c = Tensor::zeros({m, n});
  gemm_raw(a.data.data(), b.data.data(), c.data.data(), m, k, n);
  counter.record(layer_id, m * n * (k - 1), m * n * k);
  return c;
}

Tensor im2col(const Tensor& input, int64_t kernel, int64_t stride) {
  if (input.shape.size() != 3)
    throw ShapeError("im2col expects [C,H,W] input, got " + shape_str(input.shape));
  const int64_t ch = input.shape[0], h = input.shape[1], w = input.shape[2];
  if (h < kernel || w < kernel)
    throw ShapeError("im2col kernel " + std::to_string(kernel) + " larger than input " +
                     shape_str(input.shape));
  const int64_t oh = (h - kernel) / stride + 1;
  const int64_t ow = (w - kernel) / stride + 1;
  Tensor cols = Tensor::zeros({ch * kernel * kernel, oh * ow});
  const int64_t np = oh * ow;
  for (int64_t c = 0; c < ch; ++c) {
    for (int64_t di = 0; di < kernel; ++di) {
      for (int64_t dj = 0; dj < kernel; ++dj) {
        const int64_t row = (c * kernel + di) * kernel + dj;
        float* dst = cols.data.data() + row * np;
        for (int64_t oy = 0; oy < oh; ++oy) {
          const float* src = input.data.data() + (c * h + oy * stride + di) * w + dj;
          for (int64_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = src[ox * stride];
        }
      }
    }
  }
  return cols;
}

Tensor conv2d_forward(const Tensor& input, const LayerSpec& spec, OpCount& counter,
                      int layer_id) {
  if (input.shape.size() != 3 || input.shape[0] != spec.in_channels)
    throw ShapeError("conv2d input " + shape_str(input.shape) + " does not match spec");
  const auto out_shape = spec.output_shape(input.shape);
  const Tensor cols = im2col(input, spec.kernel, spec.stride);

  Tensor a;  // weight viewed as [out_ch, in_ch*k*k]
  a.shape = {spec.out_channels, spec.in_channels * spec.kernel * spec.kernel};
  a.data = spec.weight.data;

  Tensor c = gemm(a, cols, counter, layer_id);

  const int64_t np = out_shape[1] * out_shape[2];
  for (int64_t oc = 0; oc < spec.out_channels; ++oc) {
    const float b = spec.bias.data[static_cast<size_t>(oc)];
    float* row = c.data.data() + oc * np;
    for (int64_t p = 0; p < np; ++p) row[p] += b;
  }
  counter.record(layer_id, spec.out_channels * np, 0);

  c.shape = out_shape;
  return c;
}

Tensor maxpool2d_forward(const Tensor& input, const LayerSpec& spec) {
  const auto out_shape = spec.output_shape(input.shape);
  const int64_t ch = input.shape[0], h = input.shape[1], w = input.shape[2];
  const int64_t oh = out_shape[1], ow = out_shape[2];
  Tensor out = Tensor::zeros(out_shape);
  for (int64_t c = 0; c < ch; ++c) {
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        for (int64_t di = 0; di < spec.kernel; ++di) {
          for (int64_t dj = 0; dj < spec.kernel; ++dj) {
            const float v =
                input.data[static_cast<size_t>((c * h + oy * spec.stride + di) * w +
                                               ox * spec.stride + dj)];
            if (v > best) best = v;
          }
        }
        out.data[static_cast<size_t>((c * oh + oy) * ow + ox)] = best;
      }
    }
  }
  return out;
}

Tensor fully_connected_forward(const Tensor& input, const LayerSpec& spec, OpCount& counter,
                               int layer_id) {
  if (input.numel() != spec.in_features)
    throw ShapeError("fully_connected input " + shape_str(input.shape) + " does not match spec");
  Tensor x;
  x.shape = {spec.in_features, 1};
  x.data = input.data;
  Tensor c = gemm(spec.weight, x, counter, layer_id);
  for (int64_t o = 0; o < spec.out_features; ++o)
    c.data[static_cast<size_t>(o)] += spec.bias.data[static_cast<size_t>(o)];
  counter.record(layer_id, spec.out_features, 0);
  c.shape = {spec.out_features};
  return c;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data) {
    if (v < 0.0f) v = 0.0f;  // NaN is not < 0 and passes through unsanitized
  }
  return out;
}

Tensor softmax_forward(const Tensor& input) {
  Tensor out = input;
  float mx = -std::numeric_limits<float>::infinity();
  for (float v : input.data)
    if (v > mx) mx = v;
  double sum = 0.0;
  for (float& v : out.data) {
    v = std::exp(v - mx);
    sum += v;
  }
  if (sum > 0.0) {
    for (float& v : out.data) v = static_cast<float>(v / sum);
  }
  return out;
}

Tensor forward(const ModelGraph& model, const Tensor& input, OpCount& counter,
               const LayerHook& hook) {
  if (input.shape != model.input_shape)
    throw ShapeError("input shape " + shape_str(input.shape) + " does not match model " +
                     shape_str(model.input_shape));
  Tensor cur = input;
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    const int id = static_cast<int>(i);
    switch (layer.kind) {
      case LayerKind::Conv2D:
        cur = conv2d_forward(cur, layer, counter, id);
        if (hook) hook(id, cur);
        break;
      case LayerKind::FullyConnected:
        cur = fully_connected_forward(cur, layer, counter, id);
        if (hook) hook(id, cur);
        break;
      case LayerKind::MaxPool2D:
        cur = maxpool2d_forward(cur, layer);
        break;
      case LayerKind::ReLU:
        cur = relu_forward(cur);
        break;
      case LayerKind::Flatten:
        cur.shape = {cur.numel()};
        break;
      case LayerKind::Softmax:
        cur = softmax_forward(cur);
        break;
    }
  }
  return cur;
}

OpCount count_static_macs(const ModelGraph& model) {
  OpCount c;
  std::vector<int64_t> cur = model.input_shape;
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    const auto out = layer.output_shape(cur);
    const int id = static_cast<int>(i);
    if (layer.kind == LayerKind::Conv2D) {
      const int64_t m = layer.out_channels;
      const int64_t k = layer.in_channels * layer.kernel * layer.kernel;
      const int64_t n = out[1] * out[2];
      c.record(id, m * n * (k - 1) + m * n, m * n * k);
    } else if (layer.kind == LayerKind::FullyConnected) {
      const int64_t m = layer.out_features, k = layer.in_features;
      c.record(id, m * (k - 1) + m, m * k);
    }
    cur = out;
  }
  return c;
}

int argmax_class(const Tensor& logits) {
  int best = 0;
  float best_v = -std::numeric_limits<float>::infinity();
  bool seen_finite_or_inf = false;
  for (int64_t i = 0; i < logits.numel(); ++i) {
    const float v = logits.data[static_cast<size_t>(i)];
    if (std::isnan(v)) continue;
    if (!seen_finite_or_inf || v > best_v) {
      best = static_cast<int>(i);
      best_v = v;
      seen_finite_or_inf = true;
    }
  }
  return best;  // all-NaN falls back to class 0
}

}  // namespace fg
