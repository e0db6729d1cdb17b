#include "faultguard/study.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "faultguard/errors.hpp"
#include "faultguard/rng.hpp"

namespace fg {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> StudyConfig::effective_class_weights(int g) const {
  if (!gnn_class_weights.empty() && static_cast<int>(gnn_class_weights.size()) == g)
    return gnn_class_weights;
  // protected classes carry double weight: misclassifying a vulnerable node
  // costs reliability, misclassifying a non-vulnerable one only costs ops
  std::vector<double> w(static_cast<size_t>(g), 2.0);
  w[0] = 1.0;
  return w;
}

std::string StudyConfig::canonical_json() const {
  json j;
  j["out_dir"] = out_dir;
  j["data"]["train_images"] = train_images;
  j["data"]["train_labels"] = train_labels;
  j["data"]["test_images"] = test_images;
  j["data"]["test_labels"] = test_labels;
  j["fault"]["grid"] = fault_grid;
  j["fault"]["target"] = fault_target;
  j["fault"]["bit_range"] = {bit_lo, bit_hi};
  j["trials"] = trials;
  j["profile"]["inputs"] = profile_inputs;
  j["profile"]["offset"] = profile_offset;
  j["profile"]["split"] = profile_split;
  j["profile"]["label_n_flips"] = label_n_flips;
  j["feature_dim"] = feature_dim;
  j["granularity"] = granularity;
  j["vulnerable_fraction"] = vulnerable_fraction;
  j["static_fraction"] = static_fraction;
  j["tau"] = tau;
  j["seeds"]["campaign"] = seed_campaign;
  j["seeds"]["train"] = seed_train;
  j["seeds"]["gnn"] = seed_gnn;
  j["seeds"]["run"] = seed_run;
  j["train_target"]["lr"] = train_lr;
  j["train_target"]["lr_decay"] = train_lr_decay;
  j["train_target"]["epochs"] = train_epochs;
  j["train_target"]["batch"] = train_batch;
  j["gnn"]["hidden"] = gnn_hidden;
  j["gnn"]["lr"] = gnn_lr;
  j["gnn"]["momentum"] = gnn_momentum;
  j["gnn"]["epochs"] = gnn_epochs;
  j["gnn"]["class_weights"] = effective_class_weights(granularity);
  j["gnn"]["holdout_fraction"] = gnn_holdout_fraction;
  j["run"]["inputs"] = run_inputs;
  j["run"]["offset"] = run_offset;
  j["run"]["modes"] = run_modes;
  j["run"]["include_predictor_cost"] = include_predictor_cost;
  return j.dump(2);
}

std::string StudyConfig::config_hash() const {
  const std::string canon = canonical_json();
  const uint64_t h = fnv1a64(canon.data(), canon.size());
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

StudyConfig validate_config(const std::string& path, std::vector<std::string>* errors_out,
                            bool require_files) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }

  StudyConfig cfg;
  std::vector<std::string> errors;
  try {
    read_field(j, "out_dir", cfg.out_dir);
    if (j.contains("data")) {
      const auto& d = j.at("data");
      read_field(d, "train_images", cfg.train_images);
      read_field(d, "train_labels", cfg.train_labels);
      read_field(d, "test_images", cfg.test_images);
      read_field(d, "test_labels", cfg.test_labels);
    }
    if (j.contains("fault")) {
      const auto& d = j.at("fault");
      read_field(d, "grid", cfg.fault_grid);
      read_field(d, "target", cfg.fault_target);
      if (d.contains("bit_range")) {
        const auto range = d.at("bit_range").get<std::vector<int>>();
        if (range.size() == 2) {
          cfg.bit_lo = range[0];
          cfg.bit_hi = range[1];
        } else {
          errors.push_back("fault.bit_range must be [lo, hi]");
        }
      }
    }
    read_field(j, "trials", cfg.trials);
    if (j.contains("profile")) {
      const auto& d = j.at("profile");
      read_field(d, "inputs", cfg.profile_inputs);
      read_field(d, "offset", cfg.profile_offset);
      read_field(d, "split", cfg.profile_split);
      read_field(d, "label_n_flips", cfg.label_n_flips);
    }
    read_field(j, "feature_dim", cfg.feature_dim);
    read_field(j, "granularity", cfg.granularity);
    read_field(j, "vulnerable_fraction", cfg.vulnerable_fraction);
    read_field(j, "static_fraction", cfg.static_fraction);
    read_field(j, "tau", cfg.tau);
    if (j.contains("seeds")) {
      const auto& d = j.at("seeds");
      read_field(d, "campaign", cfg.seed_campaign);
      read_field(d, "train", cfg.seed_train);
      read_field(d, "gnn", cfg.seed_gnn);
      read_field(d, "run", cfg.seed_run);
    }
    if (j.contains("train_target")) {
      const auto& d = j.at("train_target");
      read_field(d, "lr", cfg.train_lr);
      read_field(d, "lr_decay", cfg.train_lr_decay);
      read_field(d, "epochs", cfg.train_epochs);
      read_field(d, "batch", cfg.train_batch);
    }
    if (j.contains("gnn")) {
      const auto& d = j.at("gnn");
      read_field(d, "hidden", cfg.gnn_hidden);
      read_field(d, "lr", cfg.gnn_lr);
      read_field(d, "momentum", cfg.gnn_momentum);
      read_field(d, "epochs", cfg.gnn_epochs);
      read_field(d, "class_weights", cfg.gnn_class_weights);
      read_field(d, "holdout_fraction", cfg.gnn_holdout_fraction);
    }
    if (j.contains("run")) {
      const auto& d = j.at("run");
      read_field(d, "inputs", cfg.run_inputs);
      read_field(d, "offset", cfg.run_offset);
      read_field(d, "modes", cfg.run_modes);
      read_field(d, "include_predictor_cost", cfg.include_predictor_cost);
    }
    read_field(j, "jobs", cfg.jobs);
  } catch (const json::exception& e) {
    errors.push_back(std::string("malformed config field: ") + e.what());
  }

  // collect every violation, not fail-fast
  if (cfg.fault_grid.empty()) errors.push_back("fault.grid must be non-empty");
  for (int nf : cfg.fault_grid) {
    if (nf < 0) errors.push_back("fault.grid entries must be >= 0");
  }
  if (cfg.fault_target != "layer_outputs" && cfg.fault_target != "weights")
    errors.push_back("fault.target must be layer_outputs or weights");
  if (cfg.bit_lo < 0 || cfg.bit_hi > 31 || cfg.bit_lo > cfg.bit_hi)
    errors.push_back("fault.bit_range must be within [0,31]");
  if (cfg.trials < 1) errors.push_back("trials must be >= 1");
  if (cfg.profile_inputs < 1) errors.push_back("profile.inputs must be >= 1");
  if (cfg.profile_offset < 0) errors.push_back("profile.offset must be >= 0");
  if (cfg.profile_split != "test" && cfg.profile_split != "train")
    errors.push_back("profile.split must be train or test");
  if (cfg.feature_dim < 1) errors.push_back("feature_dim must be >= 1");
  if (cfg.granularity != 2 && cfg.granularity != 3)
    errors.push_back("granularity must be 2 or 3");
  if (cfg.vulnerable_fraction <= 0.0 || cfg.vulnerable_fraction >= 1.0)
    errors.push_back("vulnerable_fraction must be in (0,1)");
  if (cfg.static_fraction <= 0.0 || cfg.static_fraction > 1.0)
    errors.push_back("static_fraction must be in (0,1]");
  if (cfg.tau < 0.0) errors.push_back("tau must be non-negative");
  if (cfg.train_epochs < 0) errors.push_back("train_target.epochs must be >= 0");
  if (cfg.train_batch < 1) errors.push_back("train_target.batch must be >= 1");
  if (cfg.gnn_hidden < 1) errors.push_back("gnn.hidden must be >= 1");
  if (cfg.gnn_epochs < 0) errors.push_back("gnn.epochs must be >= 0");
  if (cfg.gnn_holdout_fraction < 0.0 || cfg.gnn_holdout_fraction >= 1.0)
    errors.push_back("gnn.holdout_fraction must be in [0,1)");
  if (cfg.run_inputs < 1) errors.push_back("run.inputs must be >= 1");
  if (cfg.run_offset < 0) errors.push_back("run.offset must be >= 0");
  if (cfg.run_modes.empty()) errors.push_back("run.modes must be non-empty");
  for (const std::string& m : cfg.run_modes) {
    if (m != "none" && m != "uniform" && m != "static" && m != "adaptive" && m != "adaptive3")
      errors.push_back("unknown run mode: " + m);
  }
  if (cfg.jobs < 1) errors.push_back("jobs must be >= 1");
  if (!cfg.gnn_class_weights.empty() &&
      static_cast<int>(cfg.gnn_class_weights.size()) != cfg.granularity)
    errors.push_back("gnn.class_weights length must equal granularity");

  if (require_files) {
    for (const auto& [name, p] :
         {std::pair<const char*, const std::string&>{"data.train_images", cfg.train_images},
          {"data.train_labels", cfg.train_labels},
          {"data.test_images", cfg.test_images},
          {"data.test_labels", cfg.test_labels}}) {
      if (p.empty())
        errors.push_back(std::string(name) + " is required");
      else if (!fs::exists(p))
        errors.push_back(std::string(name) + " does not exist: " + p);
    }
  }

  // the env override takes effect after validation so the echo reflects it
  if (const char* env_out = std::getenv("FAULTGUARD_OUT")) {
    if (*env_out) cfg.out_dir = env_out;
  }

  if (errors_out) *errors_out = errors;
  if (!errors.empty() && !errors_out) {
    std::string msg = "invalid config " + path + ":";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

void update_study_json(const StudyConfig& cfg, const std::string& section,
                       const std::string& section_json) {
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.study_json();
  json study;
  if (fs::exists(path)) {
    std::ifstream f(path);
    try {
      f >> study;
    } catch (const json::parse_error& e) {
      throw ConfigError("corrupt study file " + path + ": " + e.what());
    }
    const std::string have = study.value("config_hash", "");
    if (!have.empty() && have != cfg.config_hash())
      throw ConfigError("study dir " + cfg.out_dir + " was produced by config hash " + have +
                        ", refusing to mix with " + cfg.config_hash());
  }
  study["config_hash"] = cfg.config_hash();
  study["config"] = json::parse(cfg.canonical_json());
  study["steps"][section] = json::parse(section_json);

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path);
  f << study.dump(2) << "\n";
}

std::string study_json_hash(const std::string& path) {
  if (!fs::exists(path)) return "";
  std::ifstream f(path);
  json study;
  try {
    f >> study;
  } catch (const json::parse_error&) {
    return "";
  }
  return study.value("config_hash", "");
}

}  // namespace fg
