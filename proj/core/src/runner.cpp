#include "faultguard/runner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "faultguard/errors.hpp"
#include "faultguard/graph.hpp"
#include "faultguard/nn.hpp"
#include "faultguard/parallel.hpp"
#include "faultguard/rng.hpp"

namespace fg {

bool is_known_run_mode(const std::string& mode) {
  return mode == "none" || mode == "uniform" || mode == "static" || mode == "adaptive" ||
         mode == "adaptive3";
}

FaultRealization campaign_realization(const ModelGraph& model, const RunContext& ctx,
                                      int64_t input_id, int n_flips) {
  FaultSpec spec = ctx.fault;
  spec.n_flips = n_flips;
  spec.campaign_seed = seed_mix({ctx.shared_seed, static_cast<uint64_t>(input_id),
                                 static_cast<uint64_t>(n_flips), 0x2b2bull});
  return sample_realization(spec, model, 0);
}

ProtectionPlan plan_for_input(const ModelGraph& model, const RunContext& ctx,
                              const std::string& mode, const Tensor& input) {
  PlanContext pc;
  pc.uniform_policy = ctx.uniform_policy;
  pc.static_ranking = &ctx.static_ranking;
  pc.static_fraction = ctx.static_fraction;
  pc.tau = ctx.tau;

  if (mode == "none") return make_plan(PlanMode::None, model, pc);
  if (mode == "uniform") return make_plan(PlanMode::Uniform, model, pc);
  if (mode == "static") {
    if (ctx.static_ranking.empty())
      throw ConfigError("static mode requires a layer ranking (run `profile` first)");
    return make_plan(PlanMode::Static, model, pc);
  }
  if (mode == "adaptive" || mode == "adaptive3") {
    const GnnModel* predictor = mode == "adaptive" ? ctx.predictor2 : ctx.predictor3;
    if (!predictor)
      throw ConfigError("mode " + mode + " requires a trained predictor file");
    const GraphSample graph = build_graph(model, input, ctx.feature_dim);
    const GnnPrediction prediction = gnn_predict(*predictor, graph);
    pc.prediction = &prediction;
    pc.granularity = mode == "adaptive" ? 2 : 3;
    return make_plan(PlanMode::Adaptive, model, pc);
  }
  throw ConfigError("unknown run mode: " + mode);
}

Tensor protected_forward(const ModelGraph& model, const Tensor& input,
                         const ProtectionPlan& plan, const FaultRealization& realization,
                         OpCount& counter, ProtectionLedger& ledger) {
  if (realization.target != FaultTarget::LayerOutputs)
    throw SpecError("protected campaigns use LayerOutputs fault realizations");
  const auto grouped = flips_by_layer(model, realization);

  Tensor cur = input;
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    const int id = static_cast<int>(i);
    if (layer.has_params()) {
      cur = protected_layer_forward(layer, cur, plan.policy_for(id),
                                    grouped[static_cast<size_t>(i)], counter, ledger, id);
      continue;
    }
    switch (layer.kind) {
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
      default:
        break;
    }
  }
  return cur;
}

RunReport execute_run(const ModelGraph& model, const DatasetView& slice,
                      std::span<const int64_t> input_ids, int n_flips, const std::string& mode,
                      const RunContext& ctx) {
  if (!is_known_run_mode(mode)) throw ConfigError("unknown run mode: " + mode);
  if (slice.size() != input_ids.size())
    throw ConsistencyError("input id list does not match the dataset slice");
  if ((mode == "adaptive" && !ctx.predictor2) || (mode == "adaptive3" && !ctx.predictor3))
    throw ConfigError("mode " + mode + " requires a trained predictor file");

  const size_t n = slice.size();
  std::vector<uint8_t> correct(n, 0);
  std::vector<uint8_t> clean_correct(n, 0);
  std::vector<ProtectionLedger> ledgers(n);
  std::vector<int64_t> predictor_macs(n, 0);

  const int64_t pred_macs_per_input = [&]() -> int64_t {
    if (mode != "adaptive" && mode != "adaptive3") return 0;
    const GnnModel* p = mode == "adaptive" ? ctx.predictor2 : ctx.predictor3;
    const int64_t n_nodes = static_cast<int64_t>(model.layers.size()) + 1;
    return predictor_forward_macs(n_nodes, p->feat_dim, p->hidden, p->classes);
  }();

  auto eval_input = [&](size_t idx) {
    const Tensor& image = slice.images[idx];
    const int label = slice.labels[idx];

    OpCount clean_counter;
    const Tensor clean_logits = forward(model, image, clean_counter);
    clean_correct[idx] = argmax_class(clean_logits) == label ? 1 : 0;

    const ProtectionPlan plan = plan_for_input(model, ctx, mode, image);
    const FaultRealization real =
        campaign_realization(model, ctx, input_ids[idx], n_flips);

    OpCount counter;
    ProtectionLedger ledger;
    const Tensor logits = protected_forward(model, image, plan, real, counter, ledger);
    correct[idx] = argmax_class(logits) == label ? 1 : 0;
    ledgers[idx] = ledger;
    predictor_macs[idx] = pred_macs_per_input;
  };

  parallel_for(n, ctx.jobs, eval_input);

  RunReport report;
  report.mode = mode;
  report.n_flips = n_flips;
  report.inputs = static_cast<int64_t>(n);
  report.base_macs = count_static_macs(model).muls * static_cast<int64_t>(n);
  int64_t hits = 0, clean_hits = 0;
  for (size_t i = 0; i < n; ++i) {
    hits += correct[i];
    clean_hits += clean_correct[i];
    report.detect_adds += ledgers[i].detect_adds;
    report.detect_muls += ledgers[i].detect_muls;
    report.recover_adds += ledgers[i].recover_adds;
    report.recover_muls += ledgers[i].recover_muls;
    report.corrections += ledgers[i].corrections;
    report.recomputes += ledgers[i].recomputes;
    report.predictor_macs += predictor_macs[i];
  }
  report.top1 = static_cast<double>(hits) / static_cast<double>(n);
  report.clean_top1 = static_cast<double>(clean_hits) / static_cast<double>(n);

  int64_t protection_ops = report.detect_adds + report.detect_muls + report.recover_adds +
                           report.recover_muls;
  if (ctx.include_predictor_cost) protection_ops += report.predictor_macs;
  report.overhead_ratio =
      static_cast<double>(protection_ops) / static_cast<double>(report.base_macs);
  return report;
}

void normalize_overheads(std::vector<RunReport>& reports) {
  std::map<int, double> uniform_ratio;
  for (const RunReport& r : reports) {
    if (r.mode == "uniform") uniform_ratio[r.n_flips] = r.overhead_ratio;
  }
  for (RunReport& r : reports) {
    const auto it = uniform_ratio.find(r.n_flips);
    if (it != uniform_ratio.end() && it->second > 0.0)
      r.normalized_overhead = r.overhead_ratio / it->second;
    else
      r.normalized_overhead = 0.0;
  }
}

TableSchema runs_schema() {
  return {{"mode", "n_flips", "inputs", "top1", "detect_adds", "detect_muls", "recover_adds",
           "recover_muls", "overhead_ratio", "normalized_overhead", "clean_top1", "corrections",
           "recomputes", "predictor_macs"},
          {0, 1}};
}

CsvRow run_report_row(const RunReport& r) {
  return {r.mode,
          static_cast<int64_t>(r.n_flips),
          r.inputs,
          r.top1,
          r.detect_adds,
          r.detect_muls,
          r.recover_adds,
          r.recover_muls,
          r.overhead_ratio,
          r.normalized_overhead,
          r.clean_top1,
          r.corrections,
          r.recomputes,
          r.predictor_macs};
}

RunReport run_report_from_cells(const std::vector<std::string>& cells) {
  if (cells.size() != runs_schema().columns.size())
    throw FormatError("runs.csv row has " + std::to_string(cells.size()) + " cells");
  RunReport r;
  r.mode = cells[0];
  r.n_flips = std::stoi(cells[1]);
  r.inputs = std::stoll(cells[2]);
  r.top1 = std::stod(cells[3]);
  r.detect_adds = std::stoll(cells[4]);
  r.detect_muls = std::stoll(cells[5]);
  r.recover_adds = std::stoll(cells[6]);
  r.recover_muls = std::stoll(cells[7]);
  r.overhead_ratio = std::stod(cells[8]);
  r.normalized_overhead = std::stod(cells[9]);
  r.clean_top1 = std::stod(cells[10]);
  r.corrections = std::stoll(cells[11]);
  r.recomputes = std::stoll(cells[12]);
  r.predictor_macs = std::stoll(cells[13]);
  return r;
}

ComparisonTable compare_reports(std::span<const RunReport> reports, int64_t target_macs_per_input,
                                int64_t predictor_macs_per_input) {
  if (reports.empty()) throw ComparisonError("no reports to compare");

  // all reports must share one slice size and one fault grid per mode
  std::map<std::string, std::set<int>> grids;
  const int64_t inputs = reports[0].inputs;
  for (const RunReport& r : reports) {
    if (r.inputs != inputs)
      throw ComparisonError("reports cover different input slices (" +
                            std::to_string(r.inputs) + " vs " + std::to_string(inputs) + ")");
    if (!grids[r.mode].insert(r.n_flips).second)
      throw ComparisonError("duplicate report row for mode " + r.mode + " at n_flips " +
                            std::to_string(r.n_flips));
  }
  const auto& reference_grid = grids.begin()->second;
  for (const auto& [mode, grid] : grids) {
    if (grid != reference_grid)
      throw ComparisonError("mode " + mode + " was run on a different fault grid");
  }

  std::map<int, const RunReport*> uniform_rows;
  for (const RunReport& r : reports) {
    if (r.mode == "uniform") uniform_rows[r.n_flips] = &r;
  }

  // reference MAC figures for a published LeNet-class measurement
  constexpr double kRefPredictorMacs = 8.6e4;
  constexpr double kRefTargetMacs = 2.8e5;

  ComparisonTable table;
  table.schema = {{"mode", "n_flips", "inputs", "top1", "clean_top1", "delta_vs_clean",
                   "delta_vs_uniform", "detect_ops", "recover_ops", "recovery_share",
                   "overhead_ratio", "normalized_overhead", "predictor_macs", "target_macs",
                   "predictor_target_ratio", "ref_predictor_macs", "ref_target_macs"},
                  {0, 1}};
  for (const RunReport& r : reports) {
    const auto uit = uniform_rows.find(r.n_flips);
    const double delta_uniform = uit == uniform_rows.end() ? 0.0 : r.top1 - uit->second->top1;
    const double normalized = (uit == uniform_rows.end() || uit->second->overhead_ratio <= 0.0)
                                  ? 0.0
                                  : r.overhead_ratio / uit->second->overhead_ratio;
    const int64_t detect_ops = r.detect_adds + r.detect_muls;
    const int64_t recover_ops = r.recover_adds + r.recover_muls;
    const double share = (detect_ops + recover_ops) == 0
                             ? 0.0
                             : static_cast<double>(recover_ops) /
                                   static_cast<double>(detect_ops + recover_ops);
    table.rows.push_back({r.mode, static_cast<int64_t>(r.n_flips), r.inputs, r.top1,
                          r.clean_top1, r.top1 - r.clean_top1, delta_uniform, detect_ops,
                          recover_ops, share, r.overhead_ratio, normalized,
                          predictor_macs_per_input, target_macs_per_input,
                          static_cast<double>(predictor_macs_per_input) /
                              static_cast<double>(target_macs_per_input),
                          kRefPredictorMacs, kRefTargetMacs});
  }
  return table;
}

}  // namespace fg
