#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fg {

/// Fully-resolved study configuration. Everything an experiment touches is
/// pinned here: paths, fault grid, trials, seeds, thresholds. No wall-clock
/// seeding anywhere.
struct StudyConfig {
  // paths
  std::string out_dir = "out";
  std::string train_images, train_labels, test_images, test_labels;

  // fault model
  std::vector<int> fault_grid{1, 2, 4, 8};
  std::string fault_target = "layer_outputs";  // or "weights"
  int bit_lo = 0;
  int bit_hi = 31;

  // profiling campaign
  int trials = 20;
  int profile_inputs = 200;
  int profile_offset = 0;
  std::string profile_split = "test";
  int label_n_flips = 8;  // grid point used for labeling

  // labeling / predictor
  int feature_dim = 64;
  int granularity = 2;
  double vulnerable_fraction = 0.5;
  double static_fraction = 0.5;
  double tau = 10.0;

  // seeds
  uint64_t seed_campaign = 1;
  uint64_t seed_train = 2;
  uint64_t seed_gnn = 3;
  uint64_t seed_run = 4;

  // target training
  double train_lr = 0.05;
  double train_lr_decay = 1.0;
  int train_epochs = 3;
  int train_batch = 32;

  // gnn training
  int gnn_hidden = 64;
  double gnn_lr = 0.01;
  double gnn_momentum = 0.9;
  int gnn_epochs = 200;
  std::vector<double> gnn_class_weights;     // empty = per-granularity default
  double gnn_holdout_fraction = 0.25;

  // run campaign
  int run_inputs = 200;
  int run_offset = 200;
  std::vector<std::string> run_modes{"none", "uniform", "static", "adaptive"};
  bool include_predictor_cost = false;

  int jobs = 1;

  std::string model_manifest() const { return out_dir + "/model.json"; }
  std::string model_blob() const { return out_dir + "/model.bin"; }
  std::string vuln_csv() const { return out_dir + "/vuln.csv"; }
  std::string labels_csv() const { return out_dir + "/labels.csv"; }
  std::string predictor_file(int g) const {
    return out_dir + "/predictor_g" + std::to_string(g) + ".fgnn";
  }
  std::string predictions_csv() const { return out_dir + "/predictions.csv"; }
  std::string runs_csv() const { return out_dir + "/runs.csv"; }
  std::string summary_csv() const { return out_dir + "/summary.csv"; }
  std::string study_json() const { return out_dir + "/study.json"; }

  std::vector<double> effective_class_weights(int g) const;

  /// Canonical JSON echo of every effective field (defaults filled in).
  std::string canonical_json() const;

  /// FNV-1a hex digest of canonical_json(); stamped into every artifact's
  /// study metadata so mixed-config artifacts are rejected.
  std::string config_hash() const;
};

/// Parses and validates. Reports every violation, not just the first;
/// ConfigError carries the full list. Malformed JSON reports the parse
/// location. `require_files` additionally checks referenced files exist.
StudyConfig validate_config(const std::string& path, std::vector<std::string>* errors_out = nullptr,
                            bool require_files = true);

/// study.json bookkeeping: merges `section` into the study file, creating it
/// with the config echo + hash on first write. ConfigError when the file
/// already carries a different config hash.
void update_study_json(const StudyConfig& cfg, const std::string& section,
                       const std::string& section_json);

/// Reads the config hash recorded in an existing study.json ("" if absent).
std::string study_json_hash(const std::string& path);

}  // namespace fg
