#pragma once

#include <map>
#include <string>
#include <vector>

#include "faultguard/layers.hpp"
#include "faultguard/protection.hpp"
#include "faultguard/sage.hpp"

namespace fg {

enum class PlanMode { None, Uniform, Static, Adaptive };

const char* plan_mode_name(PlanMode m);
PlanMode plan_mode_from_name(const std::string& name);

/// Per-layer policy assignment for one input. Every injectable layer has
/// exactly one policy; serializable and replayable.
struct ProtectionPlan {
  PlanMode mode = PlanMode::None;
  std::map<int, ProtectionPolicy> layer_policies;  // layer_id -> policy
  std::string provenance;  // the labels/ranking this plan came from

  std::string to_json() const;
  static ProtectionPlan from_json(const std::string& text);

  const ProtectionPolicy& policy_for(int layer_id) const;
};

/// Everything a mode might need. Uniform reads `uniform_policy`; Static
/// reads `static_ranking` (graph node ids) + `static_fraction`; Adaptive
/// reads `prediction` (per-node classes for this input's graph) +
/// `granularity` + `tau`.
struct PlanContext {
  ProtectionPolicy uniform_policy = ProtectionPolicy::abft_strict();
  const std::vector<std::pair<int, double>>* static_ranking = nullptr;
  double static_fraction = 0.5;
  const GnnPrediction* prediction = nullptr;
  int granularity = 2;
  double tau = 10.0;
};

/// Builds the per-layer policy map:
///   Uniform  - the same policy on every injectable layer.
///   Static   - AbftStrict on the top static_fraction of injectable layers
///              by ranking, NoProtect elsewhere; identical for all inputs.
///   Adaptive - gated by the input node's class. Two-level: non-vulnerable
///              input = no protection anywhere, vulnerable input =
///              AbftStrict on layers predicted vulnerable. Three-level:
///              input class picks the family (high = strict/relaxed/none by
///              layer class, moderate = the same map one level down, low =
///              none), with moderate layers at AbftRelaxed(tau).
/// PlanError when the needed context is missing.
ProtectionPlan make_plan(PlanMode mode, const ModelGraph& model, const PlanContext& ctx);

}  // namespace fg
