#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "faultguard/fault.hpp"
#include "faultguard/layers.hpp"

namespace fg {

/// Vulnerability of one (input, node) cell: the signed drop in correctness
/// between the fault-free and fault-afflicted runs. node_id 0 is the input
/// node, node_id i+1 is model layer i (graph numbering).
struct VulnRecord {
  int64_t input_id = -1;
  int node_id = -1;
  int n_flips = 0;
  int trials = 0;
  int clean_correct = 0;       // 0/1
  double faulty_rate = 0.0;    // fraction of trials with correct Top-1
  double vulnerability = 0.0;  // clean_correct - faulty_rate, in [-1, 1]
};

struct NodeLabel {
  int node_id = -1;
  int cls = 0;
};

/// vulnerability = clean_correct - correct_trials/trials.
double vuln_from_counts(int clean_correct, int correct_trials, int trials);

/// Injects spec.n_flips flips across all eligible layers for `trials`
/// seeded trials; the per-trial seed folds (campaign_seed, input_id,
/// node scope, n_flips, trial) so cells are independent of execution order.
VulnRecord profile_input(const ModelGraph& model, int64_t input_id, const Tensor& input,
                         int label, const FaultSpec& spec, int trials);

/// Same, with injection confined to one layer. SpecError on a layer that is
/// not Conv2D/FullyConnected.
VulnRecord profile_layer(const ModelGraph& model, int64_t input_id, const Tensor& input,
                         int label, int layer_id, const FaultSpec& spec, int trials);

/// Ranks one graph's records descending by vulnerability (ties broken by
/// node_id ascending). Two-level: top `vulnerable_fraction` get class 1.
/// Three-level: tertiles map to classes 2/1/0. Pure function of the
/// multiset of (node_id, vulnerability).
std::vector<NodeLabel> assign_labels(std::vector<VulnRecord> records, int granularity,
                                     double vulnerable_fraction = 0.5);

/// Mean vulnerability per layer node over a calibration set, ordered
/// descending (node_id ascending on ties). Input-node records are ignored.
std::vector<std::pair<int, double>> static_layer_ranking(std::span<const VulnRecord> records);

}  // namespace fg
