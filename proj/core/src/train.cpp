#include "faultguard/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "faultguard/errors.hpp"
#include "faultguard/nn.hpp"
#include "faultguard/rng.hpp"

namespace fg {

namespace {

// A[m x k] * B[k x n] without op accounting (trainer-internal).
void mm(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = 0.0f;
    for (int64_t t = 0; t < k; ++t) {
      const float at = a[i * k + t];
      const float* brow = b + t * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += at * brow[j];
    }
  }
}

// A[m x k] * B^T where B is [n x k].
void mm_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      const float* arow = a + i * k;
      const float* brow = b + j * k;
      for (int64_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      c[i * n + j] = acc;
    }
  }
}

// A^T * B where A is [k x m], B is [k x n].
void mm_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m * n; ++i) c[i] = 0.0f;
  for (int64_t t = 0; t < k; ++t) {
    const float* arow = a + t * m;
    const float* brow = b + t * n;
    for (int64_t i = 0; i < m; ++i) {
      const float at = arow[i];
      float* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += at * brow[j];
    }
  }
}

void col2im_add(const Tensor& dcols, Tensor& dx, int64_t kernel, int64_t stride) {
  const int64_t ch = dx.shape[0], h = dx.shape[1], w = dx.shape[2];
  const int64_t oh = (h - kernel) / stride + 1;
  const int64_t ow = (w - kernel) / stride + 1;
  const int64_t np = oh * ow;
  for (int64_t c = 0; c < ch; ++c) {
    for (int64_t di = 0; di < kernel; ++di) {
      for (int64_t dj = 0; dj < kernel; ++dj) {
        const int64_t row = (c * kernel + di) * kernel + dj;
        const float* src = dcols.data.data() + row * np;
        for (int64_t oy = 0; oy < oh; ++oy) {
          float* dst = dx.data.data() + (c * h + oy * stride + di) * w + dj;
          for (int64_t ox = 0; ox < ow; ++ox) dst[ox * stride] += src[oy * ow + ox];
        }
      }
    }
  }
}

struct LayerGrad {
  Tensor dweight;
  Tensor dbias;
};

struct ForwardCache {
  std::vector<Tensor> inputs;   // input to each layer
  std::vector<Tensor> im2cols;  // conv layers only
  Tensor logits;
};

Tensor forward_cached(const ModelGraph& model, const Tensor& input, ForwardCache& cache) {
  OpCount scratch;
  Tensor cur = input;
  cache.inputs.clear();
  cache.im2cols.assign(model.layers.size(), Tensor{});
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    cache.inputs.push_back(cur);
    switch (layer.kind) {
      case LayerKind::Conv2D: {
        cache.im2cols[i] = im2col(cur, layer.kernel, layer.stride);
        const auto out_shape = layer.output_shape(cur.shape);
        const int64_t m = layer.out_channels;
        const int64_t k = layer.in_channels * layer.kernel * layer.kernel;
        const int64_t np = out_shape[1] * out_shape[2];
        Tensor c = Tensor::zeros({m, np});
        mm(layer.weight.data.data(), cache.im2cols[i].data.data(), c.data.data(), m, k, np);
        for (int64_t oc = 0; oc < m; ++oc) {
          const float b = layer.bias.data[static_cast<size_t>(oc)];
          for (int64_t p = 0; p < np; ++p) c.data[static_cast<size_t>(oc * np + p)] += b;
        }
        c.shape = out_shape;
        cur = std::move(c);
        break;
      }
      case LayerKind::FullyConnected:
        cur = fully_connected_forward(cur, layer, scratch);
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
        throw TrainingError("softmax layers are inference-only; train on logits");
    }
  }
  cache.logits = cur;
  return cur;
}

// Backpropagates dlogits through the chain, accumulating parameter grads.
void backward(const ModelGraph& model, const ForwardCache& cache, Tensor dout,
              std::vector<LayerGrad>& grads) {
  for (size_t ri = model.layers.size(); ri-- > 0;) {
    const LayerSpec& layer = model.layers[ri];
    const Tensor& x = cache.inputs[ri];
    switch (layer.kind) {
      case LayerKind::FullyConnected: {
        const int64_t out = layer.out_features, in = layer.in_features;
        for (int64_t o = 0; o < out; ++o) {
          const float g = dout.data[static_cast<size_t>(o)];
          grads[ri].dbias.data[static_cast<size_t>(o)] += g;
          float* wrow = grads[ri].dweight.data.data() + o * in;
          const float* xv = x.data.data();
          for (int64_t t = 0; t < in; ++t) wrow[t] += g * xv[t];
        }
        Tensor dx = Tensor::zeros(x.shape);
        mm_tn(layer.weight.data.data(), dout.data.data(), dx.data.data(), in,
              out, 1);
        dout = std::move(dx);
        break;
      }
      case LayerKind::Conv2D: {
        const auto out_shape = layer.output_shape(x.shape);
        const int64_t m = layer.out_channels;
        const int64_t k = layer.in_channels * layer.kernel * layer.kernel;
        const int64_t np = out_shape[1] * out_shape[2];
        // dW = dC * cols^T, db = row sums of dC
        Tensor dw = Tensor::zeros({m, k});
        mm_nt(dout.data.data(), cache.im2cols[ri].data.data(), dw.data.data(), m, np, k);
        for (int64_t i = 0; i < m * k; ++i)
          grads[ri].dweight.data[static_cast<size_t>(i)] += dw.data[static_cast<size_t>(i)];
        for (int64_t oc = 0; oc < m; ++oc) {
          float acc = 0.0f;
          for (int64_t p = 0; p < np; ++p) acc += dout.data[static_cast<size_t>(oc * np + p)];
          grads[ri].dbias.data[static_cast<size_t>(oc)] += acc;
        }
        // dcols = W^T * dC, then scatter back to dx
        Tensor dcols = Tensor::zeros({k, np});
        mm_tn(layer.weight.data.data(), dout.data.data(), dcols.data.data(), k, m, np);
        Tensor dx = Tensor::zeros(x.shape);
        col2im_add(dcols, dx, layer.kernel, layer.stride);
        dout = std::move(dx);
        break;
      }
      case LayerKind::MaxPool2D: {
        const auto out_shape = layer.output_shape(x.shape);
        const int64_t ch = x.shape[0], h = x.shape[1], w = x.shape[2];
        const int64_t oh = out_shape[1], ow = out_shape[2];
        Tensor dx = Tensor::zeros(x.shape);
        for (int64_t c = 0; c < ch; ++c) {
          for (int64_t oy = 0; oy < oh; ++oy) {
            for (int64_t ox = 0; ox < ow; ++ox) {
              // first maximum in scan order wins, matching the forward pass
              float best = -std::numeric_limits<float>::infinity();
              int64_t best_idx = -1;
              for (int64_t di = 0; di < layer.kernel; ++di) {
                for (int64_t dj = 0; dj < layer.kernel; ++dj) {
                  const int64_t idx =
                      (c * h + oy * layer.stride + di) * w + ox * layer.stride + dj;
                  const float v = x.data[static_cast<size_t>(idx)];
                  if (v > best) {
                    best = v;
                    best_idx = idx;
                  }
                }
              }
              if (best_idx >= 0)
                dx.data[static_cast<size_t>(best_idx)] +=
                    dout.data[static_cast<size_t>((c * oh + oy) * ow + ox)];
            }
          }
        }
        dout = std::move(dx);
        break;
      }
      case LayerKind::ReLU: {
        Tensor dx = dout;
        dx.shape = x.shape;
        for (int64_t i = 0; i < x.numel(); ++i) {
          if (!(x.data[static_cast<size_t>(i)] > 0.0f)) dx.data[static_cast<size_t>(i)] = 0.0f;
        }
        dout = std::move(dx);
        break;
      }
      case LayerKind::Flatten: {
        dout.shape = x.shape;
        break;
      }
      case LayerKind::Softmax:
        throw TrainingError("softmax layers are inference-only; train on logits");
    }
  }
}

double softmax_ce_grad(const Tensor& logits, int label, Tensor& dlogits) {
  const int64_t n = logits.numel();
  double mx = -std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < n; ++i) mx = std::max(mx, double(logits.data[static_cast<size_t>(i)]));
  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i)
    sum += std::exp(double(logits.data[static_cast<size_t>(i)]) - mx);
  const double log_z = std::log(sum) + mx;
  for (int64_t i = 0; i < n; ++i) {
    const double p = std::exp(double(logits.data[static_cast<size_t>(i)]) - log_z);
    dlogits.data[static_cast<size_t>(i)] = static_cast<float>(p - (i == label ? 1.0 : 0.0));
  }
  return log_z - double(logits.data[static_cast<size_t>(label)]);
}

}  // namespace

TrainResult train_target(const ModelGraph& init, const DatasetView& train,
                         const DatasetView* test, const TrainConfig& cfg) {
  if (train.images.empty()) throw TrainingError("training dataset is empty");
  for (int y : train.labels) {
    if (y < 0 || y >= train.num_classes)
      throw TrainingError("label " + std::to_string(y) + " out of range");
  }
  TrainResult result;
  result.model = init;
  ModelGraph& model = result.model;
  model.validate();

  std::vector<LayerGrad> grads(model.layers.size());
  std::vector<LayerGrad> velocity(model.layers.size());
  for (size_t i = 0; i < model.layers.size(); ++i) {
    if (!model.layers[i].has_params()) continue;
    grads[i].dweight = Tensor::zeros(model.layers[i].weight.shape);
    grads[i].dbias = Tensor::zeros(model.layers[i].bias.shape);
    velocity[i].dweight = Tensor::zeros(model.layers[i].weight.shape);
    velocity[i].dbias = Tensor::zeros(model.layers[i].bias.shape);
  }

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});

  float lr = cfg.lr;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitMix64 rng(seed_mix({cfg.seed, static_cast<uint64_t>(epoch), 0x5e0ful}));
    rng.shuffle(order);

    double epoch_ce = 0.0;
    size_t pos = 0;
    while (pos < order.size()) {
      const size_t batch_n = std::min<size_t>(static_cast<size_t>(cfg.batch), order.size() - pos);
      for (auto& g : grads) {
        for (float& v : g.dweight.data) v = 0.0f;
        for (float& v : g.dbias.data) v = 0.0f;
      }
      const float inv_batch = 1.0f / static_cast<float>(batch_n);
      for (size_t bi = 0; bi < batch_n; ++bi) {
        const size_t idx = order[pos + bi];
        ForwardCache cache;
        const Tensor logits = forward_cached(model, train.images[idx], cache);
        Tensor dlogits = Tensor::zeros(logits.shape);
        epoch_ce += softmax_ce_grad(logits, train.labels[idx], dlogits);
        for (float& v : dlogits.data) v *= inv_batch;
        backward(model, cache, std::move(dlogits), grads);
      }
      for (size_t i = 0; i < model.layers.size(); ++i) {
        if (!model.layers[i].has_params()) continue;
        auto step = [&](Tensor& param, Tensor& vel, const Tensor& grad) {
          for (size_t t = 0; t < param.data.size(); ++t) {
            vel.data[t] = cfg.momentum * vel.data[t] - lr * grad.data[t];
            param.data[t] += vel.data[t];
          }
        };
        step(model.layers[i].weight, velocity[i].dweight, grads[i].dweight);
        step(model.layers[i].bias, velocity[i].dbias, grads[i].dbias);
      }
      pos += batch_n;
    }
    epoch_ce /= static_cast<double>(train.size());
    if (!std::isfinite(epoch_ce))
      throw TrainingError("loss diverged (non-finite) at epoch " + std::to_string(epoch));
    result.epoch_loss.push_back(epoch_ce);
    lr *= cfg.lr_decay;
  }

  if (test) result.test_accuracy = evaluate_accuracy(model, *test);
  return result;
}

double evaluate_accuracy(const ModelGraph& model, const DatasetView& data) {
  if (data.images.empty()) return 0.0;
  size_t correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    OpCount scratch;
    const Tensor logits = forward(model, data.images[i], scratch);
    if (argmax_class(logits) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_cross_entropy(const ModelGraph& model, const DatasetView& data) {
  if (data.images.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    OpCount scratch;
    const Tensor logits = forward(model, data.images[i], scratch);
    Tensor dlogits = Tensor::zeros(logits.shape);
    total += softmax_ce_grad(logits, data.labels[i], dlogits);
  }
  return total / static_cast<double>(data.size());
}

}  // namespace fg
