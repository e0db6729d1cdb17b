#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "faultguard/graph.hpp"
#include "faultguard/tensor.hpp"

namespace fg {

/// One SAGEConv layer: h_v <- relu(W_self*h_v + W_neigh*mean_{u in N(v)} h_u + bias).
struct SageLayerParams {
  int in = 0;
  int out = 0;
  std::vector<double> w_self;   // out x in, row-major
  std::vector<double> w_neigh;  // out x in
  std::vector<double> bias;     // out
};

/// Three SAGEConv layers (D->H, H->H, H->H) plus an affine classifier H->C.
/// Parameters are held in double; the on-disk format is f32.
struct GnnModel {
  int feat_dim = 0;
  int hidden = 64;
  int classes = 2;
  uint64_t init_seed = 0;
  SageLayerParams l1, l2, l3;
  std::vector<double> w_cls;  // classes x hidden
  std::vector<double> b_cls;  // classes

  size_t param_count() const;
  void check() const;
};

/// Glorot-uniform init (+-sqrt(6/(fan_in+fan_out))), zero biases.
GnnModel gnn_init(int feat_dim, int hidden, int classes, uint64_t seed);

/// Per-node pre-softmax class scores, N x C. When `counter` is given, the
/// exact adds/muls of the pass are recorded (matching
/// predictor_forward_macs for chain graphs).
std::vector<std::vector<double>> sage_forward(const GnnModel& gnn, const GraphSample& graph,
                                              OpCount* counter = nullptr);

/// Same parameter layout as the model; used for gradients and velocity.
struct GnnGradient {
  SageLayerParams l1, l2, l3;
  std::vector<double> w_cls, b_cls;
};

GnnGradient zero_like(const GnnModel& gnn);

/// Mutable views over every parameter block, in serialization order.
std::vector<std::span<double>> param_blocks(GnnModel& gnn);
std::vector<std::span<double>> grad_blocks(GnnGradient& g);

/// Summed weighted cross-entropy over the labeled nodes of all samples;
/// fills `grad` (pre-zeroed) when non-null. Sample duplication doubles
/// that sample's contribution.
double gnn_loss_and_grad(const GnnModel& gnn, std::span<const GraphSample> samples,
                         std::span<const double> class_weights, GnnGradient* grad);

struct GnnTrainConfig {
  int hidden = 64;
  int classes = 2;
  double lr = 0.01;
  double momentum = 0.9;
  int epochs = 200;
  std::vector<double> class_weights;  // empty = uniform
  uint64_t seed = 1;
};

struct GnnTrainResult {
  GnnModel model;
  std::vector<double> loss_curve;  // summed loss per epoch
};

/// Full-batch gradient descent with momentum on the summed weighted
/// cross-entropy. Deterministic given cfg.seed. TrainingError (with epoch)
/// on non-finite loss.
GnnTrainResult gnn_train(std::span<const GraphSample> samples, const GnnTrainConfig& cfg);

struct GnnPrediction {
  std::vector<int> labels;                  // argmax, lowest-index tie-break
  std::vector<std::vector<double>> probs;   // N x C softmax
};

GnnPrediction gnn_predict(const GnnModel& gnn, const GraphSample& graph);

/// Max over parameters of |analytic - central difference| / max(1, |numeric|)
/// at step 1e-4. Labels override the sample's own.
double gradient_check(const GnnModel& gnn, const GraphSample& graph,
                      const std::vector<int>& labels);

/// Closed-form forward MACs (multiplies) of the predictor on a chain graph
/// of N nodes; equals the instrumented count from sage_forward.
int64_t predictor_forward_macs(int64_t n_nodes, int64_t feat_dim, int64_t hidden,
                               int64_t classes);

/// JSON header + little-endian f32 parameter blob, one file.
void save_gnn(const GnnModel& gnn, const std::string& path);
GnnModel load_gnn(const std::string& path);

}  // namespace fg
