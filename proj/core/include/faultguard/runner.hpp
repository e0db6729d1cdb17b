#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "faultguard/csv.hpp"
#include "faultguard/dataset.hpp"
#include "faultguard/fault.hpp"
#include "faultguard/plan.hpp"
#include "faultguard/protection.hpp"

namespace fg {

/// One (mode, n_flips) row of a campaign: accuracy plus the protection op
/// ledger, normalized against the unprotected MAC budget.
struct RunReport {
  std::string mode;
  int n_flips = 0;
  int64_t inputs = 0;
  double top1 = 0.0;
  double clean_top1 = 0.0;
  int64_t base_macs = 0;  // unprotected MACs over the slice
  int64_t detect_adds = 0;
  int64_t detect_muls = 0;
  int64_t recover_adds = 0;
  int64_t recover_muls = 0;
  int64_t corrections = 0;
  int64_t recomputes = 0;
  int64_t predictor_macs = 0;  // reported separately from overhead_ratio
  double overhead_ratio = 0.0;
  double normalized_overhead = 0.0;  // 0 until normalized against uniform
};

/// Shared campaign context. The fault realization for an input depends only
/// on (shared_seed, input_id, n_flips), never on the mode, so comparisons
/// are paired.
struct RunContext {
  FaultSpec fault;  // n_flips overridden per call
  uint64_t shared_seed = 0;
  ProtectionPolicy uniform_policy = ProtectionPolicy::abft_strict();
  std::vector<std::pair<int, double>> static_ranking;
  double static_fraction = 0.5;
  const GnnModel* predictor2 = nullptr;
  const GnnModel* predictor3 = nullptr;
  int feature_dim = 64;
  double tau = 10.0;
  bool include_predictor_cost = false;
  int jobs = 1;
};

/// Mode strings accepted by execute_run: "none", "uniform", "static",
/// "adaptive" (two-level), "adaptive3" (three-level).
bool is_known_run_mode(const std::string& mode);

/// Realization an input sees at a given flip count; identical across modes.
FaultRealization campaign_realization(const ModelGraph& model, const RunContext& ctx,
                                      int64_t input_id, int n_flips);

/// Per-input protection plan for the mode (requires the matching predictor
/// for adaptive modes; ConfigError otherwise).
ProtectionPlan plan_for_input(const ModelGraph& model, const RunContext& ctx,
                              const std::string& mode, const Tensor& input);

/// Forward pass under a plan with the realization's flips routed into each
/// layer's protected kernel.
Tensor protected_forward(const ModelGraph& model, const Tensor& input,
                         const ProtectionPlan& plan, const FaultRealization& realization,
                         OpCount& counter, ProtectionLedger& ledger);

/// Runs the paired campaign for one (mode, n_flips) cell over the slice.
/// input_ids are the global ids used for fault-seed derivation.
RunReport execute_run(const ModelGraph& model, const DatasetView& slice,
                      std::span<const int64_t> input_ids, int n_flips, const std::string& mode,
                      const RunContext& ctx);

/// Fills normalized_overhead (ratio to the uniform row at the same n_flips)
/// in place; rows without a uniform partner keep 0.
void normalize_overheads(std::vector<RunReport>& reports);

/// Comparison table behind the accuracy/overhead figures: normalized
/// overheads, detection/recovery split, accuracy deltas vs clean and vs
/// uniform, and the predictor/target MAC accounting. ComparisonError when
/// the reports do not share one input slice and fault grid.
struct ComparisonTable {
  TableSchema schema;
  std::vector<CsvRow> rows;
};
ComparisonTable compare_reports(std::span<const RunReport> reports, int64_t target_macs_per_input,
                                int64_t predictor_macs_per_input);

TableSchema runs_schema();
CsvRow run_report_row(const RunReport& r);
RunReport run_report_from_cells(const std::vector<std::string>& cells);

}  // namespace fg
