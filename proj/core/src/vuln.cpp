#include "faultguard/vuln.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "faultguard/errors.hpp"
#include "faultguard/nn.hpp"
#include "faultguard/rng.hpp"

namespace fg {

double vuln_from_counts(int clean_correct, int correct_trials, int trials) {
  if (trials < 1) throw InputError("trials must be >= 1");
  return static_cast<double>(clean_correct) -
         static_cast<double>(correct_trials) / static_cast<double>(trials);
}

namespace {

VulnRecord profile_cell(const ModelGraph& model, int64_t input_id, const Tensor& input,
                        int label, int node_id, const FaultSpec& cell_spec, int trials) {
  if (trials < 1) throw InputError("trials must be >= 1");

  OpCount scratch;
  const Tensor clean_logits = forward(model, input, scratch);
  const int clean_correct = argmax_class(clean_logits) == label ? 1 : 0;

  int correct_trials = 0;
  for (int t = 0; t < trials; ++t) {
    const FaultRealization real =
        sample_realization(cell_spec, model, static_cast<uint64_t>(t));
    OpCount c;
    const Tensor logits = faulty_forward(model, input, real, c);
    if (argmax_class(logits) == label) ++correct_trials;
  }

  VulnRecord rec;
  rec.input_id = input_id;
  rec.node_id = node_id;
  rec.n_flips = cell_spec.n_flips;
  rec.trials = trials;
  rec.clean_correct = clean_correct;
  rec.faulty_rate = static_cast<double>(correct_trials) / static_cast<double>(trials);
  rec.vulnerability = vuln_from_counts(clean_correct, correct_trials, trials);
  return rec;
}

}  // namespace

VulnRecord profile_input(const ModelGraph& model, int64_t input_id, const Tensor& input,
                         int label, const FaultSpec& spec, int trials) {
  FaultSpec cell = spec;
  cell.campaign_seed = seed_mix({spec.campaign_seed, static_cast<uint64_t>(input_id),
                                 0x1297u /* input-node scope */,
                                 static_cast<uint64_t>(spec.n_flips)});
  return profile_cell(model, input_id, input, label, 0, cell, trials);
}

VulnRecord profile_layer(const ModelGraph& model, int64_t input_id, const Tensor& input,
                         int label, int layer_id, const FaultSpec& spec, int trials) {
  if (layer_id < 0 || layer_id >= static_cast<int>(model.layers.size()) ||
      !model.layers[static_cast<size_t>(layer_id)].has_params())
    throw SpecError("layer " + std::to_string(layer_id) + " is not injectable");
  FaultSpec cell = spec;
  cell.eligible_layers = {layer_id};
  cell.campaign_seed = seed_mix({spec.campaign_seed, static_cast<uint64_t>(input_id),
                                 static_cast<uint64_t>(layer_id + 1),
                                 static_cast<uint64_t>(spec.n_flips)});
  return profile_cell(model, input_id, input, label, layer_id + 1, cell, trials);
}

std::vector<NodeLabel> assign_labels(std::vector<VulnRecord> records, int granularity,
                                     double vulnerable_fraction) {
  if (records.empty()) throw InputError("assign_labels: empty record set");
  if (granularity != 2 && granularity != 3)
    throw InputError("granularity must be 2 or 3");
  if (static_cast<int>(records.size()) < granularity)
    throw InputError("need at least " + std::to_string(granularity) + " records per graph");

  std::sort(records.begin(), records.end(), [](const VulnRecord& a, const VulnRecord& b) {
    if (a.vulnerability != b.vulnerability) return a.vulnerability > b.vulnerability;
    return a.node_id < b.node_id;
  });

  const size_t n = records.size();
  std::vector<NodeLabel> labels(n);
  if (granularity == 2) {
    const size_t top = static_cast<size_t>(
        std::llround(vulnerable_fraction * static_cast<double>(n)));
    for (size_t r = 0; r < n; ++r) {
      labels[r].node_id = records[r].node_id;
      labels[r].cls = r < top ? 1 : 0;
    }
  } else {
    // tertiles: ranks [0, n/3) -> 2, [n/3, 2n/3) -> 1, rest -> 0
    for (size_t r = 0; r < n; ++r) {
      labels[r].node_id = records[r].node_id;
      const size_t tier = (r * 3) / n;
      labels[r].cls = tier == 0 ? 2 : (tier == 1 ? 1 : 0);
    }
  }
  std::sort(labels.begin(), labels.end(),
            [](const NodeLabel& a, const NodeLabel& b) { return a.node_id < b.node_id; });
  return labels;
}

std::vector<std::pair<int, double>> static_layer_ranking(std::span<const VulnRecord> records) {
  if (records.empty()) throw InputError("static_layer_ranking: empty record set");
  std::map<int, std::pair<double, int64_t>> acc;  // node_id -> (sum, count)
  for (const VulnRecord& r : records) {
    if (r.node_id == 0) continue;  // input nodes are not layers
    auto& slot = acc[r.node_id];
    slot.first += r.vulnerability;
    slot.second += 1;
  }
  std::vector<std::pair<int, double>> out;
  out.reserve(acc.size());
  for (const auto& [node_id, sum_count] : acc)
    out.emplace_back(node_id, sum_count.first / static_cast<double>(sum_count.second));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

}  // namespace fg
