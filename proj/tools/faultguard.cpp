// faultguard CLI: file-mediated study pipeline. Subcommands compose through
// artifacts in the output directory; every artifact is stamped with the
// config hash in study.json and reruns are byte-identical.

#include <algorithm>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "faultguard/csv.hpp"
#include "faultguard/dataset.hpp"
#include "faultguard/errors.hpp"
#include "faultguard/graph.hpp"
#include "faultguard/model_io.hpp"
#include "faultguard/nn.hpp"
#include "faultguard/parallel.hpp"
#include "faultguard/rng.hpp"
#include "faultguard/runner.hpp"
#include "faultguard/sage.hpp"
#include "faultguard/study.hpp"
#include "faultguard/train.hpp"
#include "faultguard/vuln.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitUsage = 64;

struct CliOptions {
  std::string config_path;
  int jobs = 0;          // 0 = use config value
  std::string mode;      // run: restrict to one mode
  int64_t input_id = -1; // predict: restrict to one input
};

StudyConfig load_config_or_die(const CliOptions& opt) {
  if (opt.config_path.empty()) throw ConfigError("--config is required");
  StudyConfig cfg = validate_config(opt.config_path);
  if (opt.jobs > 0) cfg.jobs = opt.jobs;
  return cfg;
}

DatasetView load_split(const StudyConfig& cfg, const std::string& split) {
  if (split == "train") return load_idx(cfg.train_images, cfg.train_labels);
  return load_idx(cfg.test_images, cfg.test_labels);
}

ModelGraph load_study_model(const StudyConfig& cfg) {
  if (!fs::exists(cfg.model_manifest()))
    throw ConfigError("missing artifact " + cfg.model_manifest() + "; run `train-target` first");
  return load_model(cfg.model_manifest());
}

// ---------------------------------------------------------------- train-target

int cmd_train_target(const CliOptions& opt) {
  const StudyConfig cfg = load_config_or_die(opt);
  fs::create_directories(cfg.out_dir);

  const DatasetView train = load_split(cfg, "train");
  const DatasetView test = load_split(cfg, "test");

  ModelGraph model = make_lenet(cfg.seed_train);
  TrainConfig tc;
  tc.lr = static_cast<float>(cfg.train_lr);
  tc.lr_decay = static_cast<float>(cfg.train_lr_decay);
  tc.epochs = cfg.train_epochs;
  tc.batch = cfg.train_batch;
  tc.seed = cfg.seed_train;

  std::cout << "training " << model.name << " on " << train.size() << " samples, "
            << tc.epochs << " epochs\n";
  TrainResult result = train_target(model, train, &test, tc);
  save_model(result.model, cfg.model_manifest(), cfg.model_blob());

  json meta;
  meta["test_accuracy"] = result.test_accuracy;
  meta["epoch_loss"] = result.epoch_loss;
  meta["target_macs"] = count_static_macs(result.model).muls;
  update_study_json(cfg, "train_target", meta.dump());
  std::cout << "test top1 " << result.test_accuracy << ", model saved to "
            << cfg.model_manifest() << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------- profile

struct ProfileCell {
  std::vector<VulnRecord> records;
};

std::vector<VulnRecord> run_profile_campaign(const StudyConfig& cfg, const ModelGraph& model,
                                             const DatasetView& split) {
  if (static_cast<size_t>(cfg.profile_offset + cfg.profile_inputs) > split.size())
    throw DataError("profile slice exceeds the " + cfg.profile_split + " split size " +
                    std::to_string(split.size()));

  const std::vector<int> injectable = model.injectable_layers();
  const size_t n_inputs = static_cast<size_t>(cfg.profile_inputs);
  std::vector<ProfileCell> cells(n_inputs);

  parallel_for(n_inputs, cfg.jobs, [&](size_t i) {
    const int64_t input_id = cfg.profile_offset + static_cast<int64_t>(i);
    const Tensor& image = split.images[static_cast<size_t>(input_id)];
    const int label = split.labels[static_cast<size_t>(input_id)];
    auto& out = cells[i].records;
    for (int nf : cfg.fault_grid) {
      FaultSpec spec;
      spec.n_flips = nf;
      spec.target =
          cfg.fault_target == "weights" ? FaultTarget::Weights : FaultTarget::LayerOutputs;
      spec.bit_lo = cfg.bit_lo;
      spec.bit_hi = cfg.bit_hi;
      spec.campaign_seed = cfg.seed_campaign;
      out.push_back(profile_input(model, input_id, image, label, spec, cfg.trials));
      for (int layer_id : injectable)
        out.push_back(profile_layer(model, input_id, image, label, layer_id, spec, cfg.trials));
    }
  });

  std::vector<VulnRecord> records;
  for (const auto& cell : cells)
    records.insert(records.end(), cell.records.begin(), cell.records.end());
  return records;
}

int cmd_profile(const CliOptions& opt) {
  const StudyConfig cfg = load_config_or_die(opt);
  fs::create_directories(cfg.out_dir);
  const ModelGraph model = load_study_model(cfg);
  const DatasetView split = load_split(cfg, cfg.profile_split);

  const std::vector<VulnRecord> records = run_profile_campaign(cfg, model, split);

  TableSchema schema{{"input_id", "node_id", "n_flips", "trials", "clean_correct",
                      "faulty_rate", "vulnerability"},
                     {0, 1, 2}};
  std::vector<CsvRow> rows;
  rows.reserve(records.size());
  for (const VulnRecord& r : records) {
    rows.push_back({r.input_id, static_cast<int64_t>(r.node_id),
                    static_cast<int64_t>(r.n_flips), static_cast<int64_t>(r.trials),
                    static_cast<int64_t>(r.clean_correct), r.faulty_rate, r.vulnerability});
  }
  emit_table(std::move(rows), schema, cfg.vuln_csv());

  json meta;
  meta["records"] = records.size();
  meta["weights_hash_after"] = model.weights_hash();
  update_study_json(cfg, "profile", meta.dump());
  std::cout << "wrote " << records.size() << " vulnerability records to " << cfg.vuln_csv()
            << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------------- label

std::vector<VulnRecord> read_vuln_csv(const StudyConfig& cfg) {
  if (!fs::exists(cfg.vuln_csv()))
    throw ConfigError("missing artifact " + cfg.vuln_csv() + "; run `profile` first");
  std::vector<std::string> header;
  const auto cells = read_table(cfg.vuln_csv(), &header);
  std::vector<VulnRecord> records;
  records.reserve(cells.size());
  for (const auto& row : cells) {
    if (row.size() != 7) throw FormatError("vuln.csv row width " + std::to_string(row.size()));
    VulnRecord r;
    r.input_id = std::stoll(row[0]);
    r.node_id = std::stoi(row[1]);
    r.n_flips = std::stoi(row[2]);
    r.trials = std::stoi(row[3]);
    r.clean_correct = std::stoi(row[4]);
    r.faulty_rate = std::stod(row[5]);
    r.vulnerability = std::stod(row[6]);
    records.push_back(r);
  }
  return records;
}

int cmd_label(const CliOptions& opt) {
  const StudyConfig cfg = load_config_or_die(opt);
  const auto all_records = read_vuln_csv(cfg);

  std::map<int64_t, std::vector<VulnRecord>> by_input;
  for (const VulnRecord& r : all_records) {
    if (r.n_flips == cfg.label_n_flips) by_input[r.input_id].push_back(r);
  }
  if (by_input.empty())
    throw DataError("vuln.csv has no records at label_n_flips=" +
                    std::to_string(cfg.label_n_flips));

  TableSchema schema{{"input_id", "node_id", "granularity", "class"}, {0, 1, 2}};
  std::vector<CsvRow> rows;
  for (const int granularity : {2, 3}) {
    for (const auto& [input_id, records] : by_input) {
      const auto labels = assign_labels(records, granularity, cfg.vulnerable_fraction);
      for (const NodeLabel& l : labels) {
        rows.push_back({input_id, static_cast<int64_t>(l.node_id),
                        static_cast<int64_t>(granularity), static_cast<int64_t>(l.cls)});
      }
    }
  }
  emit_table(std::move(rows), schema, cfg.labels_csv());

  json meta;
  meta["graphs"] = by_input.size();
  meta["label_n_flips"] = cfg.label_n_flips;
  update_study_json(cfg, "label", meta.dump());
  std::cout << "wrote labels for " << by_input.size() << " graphs to " << cfg.labels_csv()
            << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train-gnn

std::map<int64_t, std::map<int, int>> read_labels_csv(const StudyConfig& cfg, int granularity) {
  if (!fs::exists(cfg.labels_csv()))
    throw ConfigError("missing artifact " + cfg.labels_csv() + "; run `label` first");
  std::vector<std::string> header;
  const auto cells = read_table(cfg.labels_csv(), &header);
  std::map<int64_t, std::map<int, int>> by_input;  // input -> node -> class
  for (const auto& row : cells) {
    if (row.size() != 4) throw FormatError("labels.csv row width " + std::to_string(row.size()));
    if (std::stoi(row[2]) != granularity) continue;
    by_input[std::stoll(row[0])][std::stoi(row[1])] = std::stoi(row[3]);
  }
  return by_input;
}

std::set<int> granularities_needed(const StudyConfig& cfg) {
  std::set<int> out{cfg.granularity};
  for (const std::string& m : cfg.run_modes) {
    if (m == "adaptive") out.insert(2);
    if (m == "adaptive3") out.insert(3);
  }
  return out;
}

int cmd_train_gnn(const CliOptions& opt) {
  const StudyConfig cfg = load_config_or_die(opt);
  const ModelGraph model = load_study_model(cfg);
  const DatasetView split = load_split(cfg, cfg.profile_split);

  json meta;
  for (const int granularity : granularities_needed(cfg)) {
    const auto labels_by_input = read_labels_csv(cfg, granularity);
    if (labels_by_input.empty())
      throw DataError("labels.csv has no granularity-" + std::to_string(granularity) + " rows");

    std::vector<GraphSample> samples;
    samples.reserve(labels_by_input.size());
    for (const auto& [input_id, node_labels] : labels_by_input) {
      GraphSample g = build_graph(model, split.images[static_cast<size_t>(input_id)],
                                  cfg.feature_dim);
      g.input_id = input_id;
      for (const auto& [node_id, cls] : node_labels)
        g.labels[static_cast<size_t>(node_id)] = cls;
      samples.push_back(std::move(g));
    }

    // deterministic split: shuffle graph order, hold out the tail
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    SplitMix64 rng(seed_mix({cfg.seed_gnn, 0x5b117ull, static_cast<uint64_t>(granularity)}));
    rng.shuffle(order);
    const size_t holdout =
        static_cast<size_t>(cfg.gnn_holdout_fraction * static_cast<double>(samples.size()));
    std::vector<GraphSample> train_set, eval_set;
    for (size_t i = 0; i < order.size(); ++i) {
      if (i + holdout < order.size()) train_set.push_back(samples[order[i]]);
      else eval_set.push_back(samples[order[i]]);
    }

    GnnTrainConfig tc;
    tc.hidden = cfg.gnn_hidden;
    tc.classes = granularity;
    tc.lr = cfg.gnn_lr;
    tc.momentum = cfg.gnn_momentum;
    tc.epochs = cfg.gnn_epochs;
    tc.class_weights = cfg.effective_class_weights(granularity);
    tc.seed = cfg.seed_gnn;
    const GnnTrainResult result = gnn_train(train_set, tc);
    save_gnn(result.model, cfg.predictor_file(granularity));

    // held-out node accuracy and per-class recall
    std::vector<int64_t> per_class_total(static_cast<size_t>(granularity), 0);
    std::vector<int64_t> per_class_hit(static_cast<size_t>(granularity), 0);
    int64_t total = 0, hit = 0;
    const auto& eval_on = eval_set.empty() ? train_set : eval_set;
    for (const GraphSample& g : eval_on) {
      const GnnPrediction pred = gnn_predict(result.model, g);
      for (size_t v = 0; v < g.num_nodes(); ++v) {
        const int y = g.labels[v];
        if (y < 0) continue;
        ++total;
        ++per_class_total[static_cast<size_t>(y)];
        if (pred.labels[v] == y) {
          ++hit;
          ++per_class_hit[static_cast<size_t>(y)];
        }
      }
    }
    json gm;
    gm["train_graphs"] = train_set.size();
    gm["holdout_graphs"] = eval_set.size();
    gm["final_loss"] = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
    gm["holdout_node_accuracy"] =
        total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
    json recalls = json::array();
    for (int c = 0; c < granularity; ++c) {
      const int64_t t = per_class_total[static_cast<size_t>(c)];
      recalls.push_back(t == 0 ? 0.0
                               : static_cast<double>(per_class_hit[static_cast<size_t>(c)]) /
                                     static_cast<double>(t));
    }
    gm["per_class_recall"] = recalls;
    meta["granularity_" + std::to_string(granularity)] = gm;
    std::cout << "predictor g" << granularity << ": holdout node accuracy "
              << gm["holdout_node_accuracy"] << "\n";
  }
  update_study_json(cfg, "train_gnn", meta.dump());
  return kExitOk;
}

// --------------------------------------------------------------------- predict

int cmd_predict(const CliOptions& opt) {
  const StudyConfig cfg = load_config_or_die(opt);
  const ModelGraph model = load_study_model(cfg);
  const std::string predictor_path = cfg.predictor_file(cfg.granularity);
  if (!fs::exists(predictor_path))
    throw ConfigError("missing artifact " + predictor_path + "; run `train-gnn` first");
  const GnnModel gnn = load_gnn(predictor_path);
  const DatasetView split = load_split(cfg, cfg.profile_split);

  std::vector<int64_t> ids;
  if (opt.input_id >= 0) {
    ids.push_back(opt.input_id);
  } else {
    for (int i = 0; i < cfg.run_inputs; ++i)
      ids.push_back(cfg.run_offset + static_cast<int64_t>(i));
  }

  std::vector<std::string> columns{"input_id", "node_id", "class"};
  for (int c = 0; c < gnn.classes; ++c) columns.push_back("p" + std::to_string(c));
  TableSchema schema{columns, {0, 1}};

  std::vector<CsvRow> rows;
  for (int64_t id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= split.size())
      throw DataError("input id " + std::to_string(id) + " outside the " + cfg.profile_split +
                      " split");
    const GraphSample g = build_graph(model, split.images[static_cast<size_t>(id)],
                                      cfg.feature_dim);
    const GnnPrediction pred = gnn_predict(gnn, g);
    for (size_t v = 0; v < g.num_nodes(); ++v) {
      CsvRow row{id, static_cast<int64_t>(v), static_cast<int64_t>(pred.labels[v])};
      for (int c = 0; c < gnn.classes; ++c) row.push_back(pred.probs[v][static_cast<size_t>(c)]);
      rows.push_back(std::move(row));
    }
  }
  emit_table(std::move(rows), schema, cfg.predictions_csv());

  json meta;
  meta["inputs"] = ids.size();
  meta["granularity"] = gnn.classes;
  update_study_json(cfg, "predict", meta.dump());
  std::cout << "wrote predictions for " << ids.size() << " inputs to " << cfg.predictions_csv()
            << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------------- run

int cmd_run(const CliOptions& opt) {
  const StudyConfig cfg = load_config_or_die(opt);
  const ModelGraph model = load_study_model(cfg);
  const DatasetView split = load_split(cfg, cfg.profile_split);

  std::vector<std::string> modes = cfg.run_modes;
  if (!opt.mode.empty()) {
    if (!is_known_run_mode(opt.mode)) throw ConfigError("unknown run mode: " + opt.mode);
    modes = {opt.mode};
  }

  RunContext ctx;
  ctx.fault.target =
      cfg.fault_target == "weights" ? FaultTarget::Weights : FaultTarget::LayerOutputs;
  ctx.fault.bit_lo = cfg.bit_lo;
  ctx.fault.bit_hi = cfg.bit_hi;
  ctx.shared_seed = cfg.seed_run;
  ctx.static_fraction = cfg.static_fraction;
  ctx.feature_dim = cfg.feature_dim;
  ctx.tau = cfg.tau;
  ctx.include_predictor_cost = cfg.include_predictor_cost;
  ctx.jobs = cfg.jobs;

  const bool needs_static = std::count(modes.begin(), modes.end(), "static") > 0;
  if (needs_static) {
    const auto records = read_vuln_csv(cfg);
    std::vector<VulnRecord> calib;
    for (const VulnRecord& r : records)
      if (r.n_flips == cfg.label_n_flips) calib.push_back(r);
    if (calib.empty())
      throw DataError("vuln.csv has no calibration records at n_flips=" +
                      std::to_string(cfg.label_n_flips));
    ctx.static_ranking = static_layer_ranking(calib);
  }

  GnnModel predictor2, predictor3;
  if (std::count(modes.begin(), modes.end(), "adaptive") > 0) {
    if (!fs::exists(cfg.predictor_file(2)))
      throw ConfigError("missing artifact " + cfg.predictor_file(2) + "; run `train-gnn` first");
    predictor2 = load_gnn(cfg.predictor_file(2));
    ctx.predictor2 = &predictor2;
  }
  if (std::count(modes.begin(), modes.end(), "adaptive3") > 0) {
    if (!fs::exists(cfg.predictor_file(3)))
      throw ConfigError("missing artifact " + cfg.predictor_file(3) + "; run `train-gnn` first");
    predictor3 = load_gnn(cfg.predictor_file(3));
    ctx.predictor3 = &predictor3;
  }

  if (static_cast<size_t>(cfg.run_offset + cfg.run_inputs) > split.size())
    throw DataError("run slice exceeds the " + cfg.profile_split + " split size " +
                    std::to_string(split.size()));
  const DatasetView slice =
      split.slice(static_cast<size_t>(cfg.run_offset), static_cast<size_t>(cfg.run_inputs));
  std::vector<int64_t> input_ids(static_cast<size_t>(cfg.run_inputs));
  std::iota(input_ids.begin(), input_ids.end(), static_cast<int64_t>(cfg.run_offset));

  std::vector<RunReport> reports;
  for (const std::string& mode : modes) {
    for (int nf : cfg.fault_grid) {
      std::cout << "run mode=" << mode << " n_flips=" << nf << "\n";
      reports.push_back(execute_run(model, slice, input_ids, nf, mode, ctx));
    }
  }
  normalize_overheads(reports);

  std::vector<CsvRow> rows;
  rows.reserve(reports.size());
  for (const RunReport& r : reports) rows.push_back(run_report_row(r));
  emit_table(std::move(rows), runs_schema(), cfg.runs_csv());

  json meta;
  meta["modes"] = modes;
  meta["rows"] = reports.size();
  update_study_json(cfg, "run", meta.dump());
  std::cout << "wrote " << reports.size() << " campaign rows to " << cfg.runs_csv() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------- report

int cmd_report(const CliOptions& opt) {
  const StudyConfig cfg = load_config_or_die(opt);
  if (!fs::exists(cfg.runs_csv()))
    throw ConfigError("missing artifact " + cfg.runs_csv() + "; run `run` first");

  // refuse to mix configs: the study file must carry our hash
  const std::string recorded = study_json_hash(cfg.study_json());
  if (!recorded.empty() && recorded != cfg.config_hash())
    throw ConfigError("study dir " + cfg.out_dir + " carries config hash " + recorded +
                      ", refusing to report with config " + cfg.config_hash());

  const ModelGraph model = load_study_model(cfg);
  std::vector<std::string> header;
  const auto cells = read_table(cfg.runs_csv(), &header);
  std::vector<RunReport> reports;
  reports.reserve(cells.size());
  for (const auto& row : cells) reports.push_back(run_report_from_cells(row));

  const int64_t target_macs = count_static_macs(model).muls;
  const int64_t n_nodes = static_cast<int64_t>(model.layers.size()) + 1;
  const int64_t predictor_macs = predictor_forward_macs(
      n_nodes, cfg.feature_dim + kNodeKindSlots, cfg.gnn_hidden, cfg.granularity);

  const ComparisonTable table = compare_reports(reports, target_macs, predictor_macs);
  emit_table(std::vector<CsvRow>(table.rows), table.schema, cfg.summary_csv());

  // headline aggregates: mean overhead reduction of adaptive vs the baselines
  auto mean_reduction = [&reports](const std::string& from, const std::string& to) -> double {
    double total = 0.0;
    int count = 0;
    for (const RunReport& a : reports) {
      if (a.mode != to) continue;
      for (const RunReport& b : reports) {
        if (b.mode == from && b.n_flips == a.n_flips && b.overhead_ratio > 0.0) {
          total += 100.0 * (1.0 - a.overhead_ratio / b.overhead_ratio);
          ++count;
        }
      }
    }
    return count == 0 ? 0.0 : total / count;
  };

  json meta;
  meta["rows"] = table.rows.size();
  meta["adaptive_vs_static_reduction_pct"] = mean_reduction("static", "adaptive");
  meta["adaptive_vs_uniform_reduction_pct"] = mean_reduction("uniform", "adaptive");
  meta["predictor_macs"] = predictor_macs;
  meta["target_macs"] = target_macs;
  update_study_json(cfg, "report", meta.dump());
  std::cout << "wrote summary to " << cfg.summary_csv() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"faultguard: adaptive soft-error protection study pipeline"};
  app.require_subcommand(1);

  CliOptions opt;
  const std::map<std::string, int (*)(const CliOptions&)> handlers{
      {"train-target", cmd_train_target}, {"profile", cmd_profile}, {"label", cmd_label},
      {"train-gnn", cmd_train_gnn},       {"predict", cmd_predict}, {"run", cmd_run},
      {"report", cmd_report}};

  for (const auto& [name, fn] : handlers) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "study config JSON")->required();
    sub->add_option("--jobs", opt.jobs, "parallel worker count (overrides config)");
    if (name == "run") sub->add_option("--mode", opt.mode, "restrict to one mode");
    if (name == "predict") sub->add_option("--input-id", opt.input_id, "single input id");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    for (const auto& [name, fn] : handlers) {
      if (app.got_subcommand(name)) return fn(opt);
    }
    std::cerr << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ConsistencyError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
