#include "faultguard/plan.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "faultguard/errors.hpp"

namespace fg {

using nlohmann::json;

const char* plan_mode_name(PlanMode m) {
  switch (m) {
    case PlanMode::None: return "none";
    case PlanMode::Uniform: return "uniform";
    case PlanMode::Static: return "static";
    case PlanMode::Adaptive: return "adaptive";
  }
  return "?";
}

PlanMode plan_mode_from_name(const std::string& name) {
  if (name == "none") return PlanMode::None;
  if (name == "uniform") return PlanMode::Uniform;
  if (name == "static") return PlanMode::Static;
  if (name == "adaptive") return PlanMode::Adaptive;
  throw FormatError("unknown plan mode: " + name);
}

const ProtectionPolicy& ProtectionPlan::policy_for(int layer_id) const {
  static const ProtectionPolicy no_protect = ProtectionPolicy::none();
  const auto it = layer_policies.find(layer_id);
  return it == layer_policies.end() ? no_protect : it->second;
}

namespace {

json policy_to_json(const ProtectionPolicy& p) {
  json j;
  switch (p.kind) {
    case PolicyKind::NoProtect:
      j["kind"] = "none";
      break;
    case PolicyKind::AbftStrict:
      j["kind"] = "abft";
      j["tau"] = 0.0;
      break;
    case PolicyKind::AbftRelaxed:
      j["kind"] = "abft";
      j["tau"] = p.tau;
      break;
    case PolicyKind::Tmr:
      j["kind"] = "tmr";
      break;
  }
  return j;
}

ProtectionPolicy policy_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") return ProtectionPolicy::none();
  if (kind == "tmr") return ProtectionPolicy::tmr();
  if (kind == "abft") {
    const double tau = j.value("tau", 0.0);
    if (tau < 0.0) throw FormatError("policy tau must be non-negative");
    return tau > 0.0 ? ProtectionPolicy::abft_relaxed(tau) : ProtectionPolicy::abft_strict();
  }
  throw FormatError("unknown policy kind: " + kind);
}

}  // namespace

std::string ProtectionPlan::to_json() const {
  json j;
  j["mode"] = plan_mode_name(mode);
  j["provenance"] = provenance;
  json policies = json::object();
  for (const auto& [layer_id, policy] : layer_policies)
    policies[std::to_string(layer_id)] = policy_to_json(policy);
  j["policies"] = std::move(policies);
  return j.dump();
}

ProtectionPlan ProtectionPlan::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("plan parse error: ") + e.what());
  }
  ProtectionPlan plan;
  plan.mode = plan_mode_from_name(j.at("mode").get<std::string>());
  plan.provenance = j.value("provenance", "");
  for (const auto& [key, jp] : j.at("policies").items())
    plan.layer_policies[std::stoi(key)] = policy_from_json(jp);
  return plan;
}

ProtectionPlan make_plan(PlanMode mode, const ModelGraph& model, const PlanContext& ctx) {
  const std::vector<int> injectable = model.injectable_layers();
  ProtectionPlan plan;
  plan.mode = mode;

  switch (mode) {
    case PlanMode::None: {
      for (int id : injectable) plan.layer_policies[id] = ProtectionPolicy::none();
      plan.provenance = "unprotected";
      return plan;
    }
    case PlanMode::Uniform: {
      for (int id : injectable) plan.layer_policies[id] = ctx.uniform_policy;
      plan.provenance = std::string("uniform:") + policy_kind_name(ctx.uniform_policy.kind);
      return plan;
    }
    case PlanMode::Static: {
      if (!ctx.static_ranking)
        throw PlanError("static plan requires a layer ranking in the context");
      const size_t budget = static_cast<size_t>(std::llround(
          ctx.static_fraction * static_cast<double>(injectable.size())));
      for (int id : injectable) plan.layer_policies[id] = ProtectionPolicy::none();
      size_t taken = 0;
      std::string prov = "static_rank:";
      for (const auto& [node_id, mean_vuln] : *ctx.static_ranking) {
        if (taken >= budget) break;
        const int layer_id = node_id - 1;
        if (!model.layers[static_cast<size_t>(layer_id)].has_params()) continue;
        plan.layer_policies[layer_id] = ProtectionPolicy::abft_strict();
        prov += std::to_string(layer_id) + ";";
        ++taken;
      }
      plan.provenance = prov;
      return plan;
    }
    case PlanMode::Adaptive: {
      if (!ctx.prediction)
        throw PlanError("adaptive plan requires a predictor output in the context");
      const auto& labels = ctx.prediction->labels;
      if (labels.size() != model.layers.size() + 1)
        throw PlanError("prediction covers " + std::to_string(labels.size()) +
                        " nodes, model graph has " + std::to_string(model.layers.size() + 1));
      std::string prov = "predicted:";
      for (int l : labels) prov += std::to_string(l);
      plan.provenance = prov;

      const int input_cls = labels[0];
      if (ctx.granularity == 2) {
        if (input_cls == 0) {
          for (int id : injectable) plan.layer_policies[id] = ProtectionPolicy::none();
        } else {
          for (int id : injectable) {
            plan.layer_policies[id] = labels[static_cast<size_t>(id) + 1] == 1
                                          ? ProtectionPolicy::abft_strict()
                                          : ProtectionPolicy::none();
          }
        }
        return plan;
      }
      // three-level: the input class shifts the whole per-layer map down
      // 0, 1 or 2 severity steps
      const int demotion = 2 - input_cls;
      for (int id : injectable) {
        const int layer_cls = labels[static_cast<size_t>(id) + 1];
        const int effective = layer_cls - demotion;
        if (effective >= 2) {
          plan.layer_policies[id] = ProtectionPolicy::abft_strict();
        } else if (effective == 1) {
          plan.layer_policies[id] = ProtectionPolicy::abft_relaxed(ctx.tau);
        } else {
          plan.layer_policies[id] = ProtectionPolicy::none();
        }
      }
      return plan;
    }
  }
  throw PlanError("unreachable plan mode");
}

}  // namespace fg
