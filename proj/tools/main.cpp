#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "resgin/data.hpp"
#include "resgin/experiments.hpp"
#include "resgin/model.hpp"
#include "resgin/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace resgin;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig tr;
  int test_batch = 128;
  std::string data;
  std::string cells;
  std::string out = "out/run";
  std::string ckpt;
  bool fail_fast = false;
};

// flat Table-2-style keys accepted in --config files
const std::vector<std::string> kConfigKeys = {
    "molecule_channels", "hidden_channels", "middle_channels", "attn_channels",
    "lstm_channels",     "layer_count",     "out_channels",    "num_heads",
    "dropout",           "variant",         "lr",              "num_epochs",
    "train_batch_size",  "test_batch_size", "n_folds",         "seed",
    "parallel_folds",    "data",            "cells",           "out"};

json config_to_json(const RunConfig& c) {
  return json{{"molecule_channels", c.model.d_atom},
              {"hidden_channels", c.model.d_hidden},
              {"middle_channels", c.model.d_middle},
              {"attn_channels", c.model.d_attn},
              {"lstm_channels", c.model.d_lstm},
              {"layer_count", c.model.gin_layers},
              {"out_channels", c.model.out_classes},
              {"num_heads", c.model.n_heads},
              {"dropout", c.model.dropout},
              {"variant", model::to_string(c.model.variant)},
              {"lr", c.tr.lr},
              {"num_epochs", c.tr.epochs},
              {"train_batch_size", c.tr.batch},
              {"test_batch_size", c.test_batch},
              {"n_folds", c.tr.folds},
              {"seed", c.tr.seed},
              {"parallel_folds", c.tr.parallel_folds},
              {"data", c.data},
              {"cells", c.cells},
              {"out", c.out}};
}

/// Applies a --config file under flags > file > defaults precedence: `skip`
/// holds the keys already pinned by command-line flags.
void apply_config_file(RunConfig& c, const std::string& path,
                       const std::vector<std::string>& skip) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(kConfigKeys.begin(), kConfigKeys.end(), key) == kConfigKeys.end())
      throw UsageError("unknown config key '" + key + "'");
    if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
    try {
      if (key == "molecule_channels") c.model.d_atom = value.get<int>();
      else if (key == "hidden_channels") c.model.d_hidden = value.get<int>();
      else if (key == "middle_channels") c.model.d_middle = value.get<int>();
      else if (key == "attn_channels") c.model.d_attn = value.get<int>();
      else if (key == "lstm_channels") c.model.d_lstm = value.get<int>();
      else if (key == "layer_count") c.model.gin_layers = value.get<int>();
      else if (key == "out_channels") c.model.out_classes = value.get<int>();
      else if (key == "num_heads") c.model.n_heads = value.get<int>();
      else if (key == "dropout") c.model.dropout = value.get<double>();
      else if (key == "variant") c.model.variant = model::variant_from_string(value.get<std::string>());
      else if (key == "lr") c.tr.lr = value.get<double>();
      else if (key == "num_epochs") c.tr.epochs = value.get<int>();
      else if (key == "train_batch_size") c.tr.batch = value.get<int>();
      else if (key == "test_batch_size") c.test_batch = value.get<int>();
      else if (key == "n_folds") c.tr.folds = value.get<int>();
      else if (key == "seed") c.tr.seed = value.get<uint64_t>();
      else if (key == "parallel_folds") c.tr.parallel_folds = value.get<int>();
      else if (key == "data") c.data = value.get<std::string>();
      else if (key == "cells") c.cells = value.get<std::string>();
      else if (key == "out") c.out = value.get<std::string>();
    } catch (const json::exception&) {
      throw UsageError("config key '" + key + "' has the wrong type");
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data::DataError("cannot write " + path.string());
  out << text;
}

void echo_config(const RunConfig& c) {
  fs::create_directories(c.out);
  write_text(fs::path(c.out) / "config.json", config_to_json(c).dump(2) + "\n");
}

std::string metrics_csv_line(const std::string& tag, const eval::MetricsReport& m) {
  std::ostringstream os;
  os << tag << ',' << eval::metric_to_string(m.auc) << ',' << eval::metric_to_string(m.acc) << ','
     << eval::metric_to_string(m.f1) << ',' << eval::metric_to_string(m.prec) << ','
     << eval::metric_to_string(m.recall) << ',' << eval::metric_to_string(m.bacc) << ','
     << eval::metric_to_string(m.tpr) << ',' << eval::metric_to_string(m.tnr);
  return os.str();
}

void require_inputs(const RunConfig& c, bool need_ckpt) {
  if (c.data.empty())
    throw UsageError("--data is required (or provide 'data' in --config)");
  if (c.cells.empty())
    throw UsageError("--cells is required (or provide 'cells' in --config)");
  if (need_ckpt && c.ckpt.empty()) throw UsageError("--ckpt is required");
}

int cmd_train(const RunConfig& cfg) {
  require_inputs(cfg, false);
  data::Dataset dataset = data::load_dataset(cfg.data, cfg.cells, cfg.fail_fast);
  echo_config(cfg);

  std::ofstream log_file(fs::path(cfg.out) / "log.jsonl", std::ios::binary);
  train::LogFn logger = [&log_file](const train::EpochLog& e) {
    log_file << json{{"fold", e.fold}, {"epoch", e.epoch}, {"loss", e.loss}, {"seconds", e.seconds}}
                    .dump()
             << "\n";
  };

  train::CvResult cv = train::run_cv(dataset, cfg.model, cfg.tr, logger);

  std::ostringstream summary;
  summary << "fold,auc,acc,f1,prec,recall,bacc,tpr,tnr\n";
  for (const train::FoldResult& f : cv.folds) {
    summary << metrics_csv_line(std::to_string(f.fold + 1), f.metrics) << "\n";
    model::save_checkpoint(
        (fs::path(cfg.out) / ("fold" + std::to_string(f.fold + 1) + ".ckpt")).string(),
        const_cast<train::FoldResult&>(f).params);
  }
  summary << metrics_csv_line("mean", cv.mean) << "\n";
  summary << metrics_csv_line("std", cv.stdev) << "\n";
  write_text(fs::path(cfg.out) / "summary.csv", summary.str());

  auto show = [](const char* name, const std::optional<double>& m, const std::optional<double>& s) {
    std::cout << "  " << name << ": ";
    if (m) std::cout << *m << " ± " << (s ? *s : 0.0);
    else std::cout << "undefined";
    std::cout << "\n";
  };
  std::cout << "cross-validation over " << cv.folds.size() << " folds ("
            << dataset.samples.size() << " samples)\n";
  std::cout.precision(4);
  std::cout << std::fixed;
  show("AUC", cv.mean.auc, cv.stdev.auc);
  show("ACC", cv.mean.acc, cv.stdev.acc);
  show("F1", cv.mean.f1, cv.stdev.f1);
  show("PREC", cv.mean.prec, cv.stdev.prec);
  show("RECALL", cv.mean.recall, cv.stdev.recall);
  show("BACC", cv.mean.bacc, cv.stdev.bacc);
  std::cout << "wrote " << cfg.out << "/summary.csv\n";
  return 0;
}

struct PredictPair {
  std::string drug_a, drug_b, cell_line;
};

std::vector<PredictPair> load_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data::DataError("FileNotFound: cannot open pairs file " + path);
  std::string line;
  if (!std::getline(in, line)) throw data::DataError("BadHeader: empty pairs file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const bool with_label = line == "drug_a_smiles,drug_b_smiles,cell_line,label";
  if (!with_label && line != "drug_a_smiles,drug_b_smiles,cell_line")
    throw data::DataError("BadHeader: pairs file needs drug_a_smiles,drug_b_smiles,cell_line[,label]");
  std::vector<PredictPair> pairs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (fields.size() != (with_label ? 4u : 3u))
      throw data::DataError("bad pairs row at line " + std::to_string(line_no));
    pairs.push_back(PredictPair{fields[0], fields[1], fields[2]});
  }
  return pairs;
}

std::string top_atoms(const std::vector<double>& attn, int k = 3) {
  std::vector<int> order(attn.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&attn](int a, int b) { return attn[a] > attn[b]; });
  std::ostringstream os;
  const int n = std::min<int>(k, static_cast<int>(order.size()));
  for (int i = 0; i < n; ++i) {
    if (i) os << ';';
    os << order[i];
  }
  return os.str();
}

int cmd_predict(const RunConfig& cfg) {
  require_inputs(cfg, true);
  model::ModelParams params = model::load_checkpoint(cfg.ckpt);
  data::CellLineTable cells = data::load_cell_lines(cfg.cells);
  if (cells.d_gene != params.config.d_gene)
    throw model::ModelError("checkpoint expects " + std::to_string(params.config.d_gene) +
                            " genes per cell line, file has " + std::to_string(cells.d_gene));
  std::vector<PredictPair> pairs = load_pairs(cfg.data);
  data::GraphCache cache;

  echo_config(cfg);
  std::ostringstream out;
  out.precision(17);
  out << "drug_a,drug_b,cell_line,p,top_atoms_a,top_atoms_b\n";
  for (const PredictPair& pair : pairs) {
    const auto& ga = cache.get(pair.drug_a).graph;
    const auto& gb = cache.get(pair.drug_b).graph;
    model::ForwardOutput fwd =
        model::forward(params, ga, gb, cells.profile(pair.cell_line), model::Mode::Infer);
    out << pair.drug_a << ',' << pair.drug_b << ',' << pair.cell_line << ',' << fwd.p << ','
        << top_atoms(fwd.attn_gin_a) << ',' << top_atoms(fwd.attn_gin_b) << "\n";
  }
  const fs::path path = fs::path(cfg.out) / "predictions.csv";
  write_text(path, out.str());
  std::cout << "wrote " << path.string() << " (" << pairs.size() << " pairs)\n";
  return 0;
}

int cmd_experiment(const RunConfig& cfg, const std::string& which) {
  require_inputs(cfg, false);
  data::Dataset dataset = data::load_dataset(cfg.data, cfg.cells, cfg.fail_fast);
  echo_config(cfg);

  auto row_json = [](const eval::ExperimentRow& r) {
    return json{{"variant", r.variant},
                {"depth", r.depth},
                {"lr", r.lr},
                {"dropout", r.dropout},
                {"auc", r.metrics.auc ? json(*r.metrics.auc) : json()},
                {"acc", r.metrics.acc ? json(*r.metrics.acc) : json()},
                {"f1", r.metrics.f1 ? json(*r.metrics.f1) : json()},
                {"final_loss", r.final_loss}};
  };

  json summary;
  if (which == "ablate") {
    std::vector<eval::AblationRow> rows = eval::ablation_run(dataset, cfg.model, cfg.tr);
    std::ostringstream csv;
    csv << eval::ablation_csv_header() << "\n";
    for (const eval::AblationRow& r : rows) {
      csv << eval::ablation_csv_row(r) << "\n";
      summary["variants"][r.variant] = {
          {"auc", r.mean.auc ? json(*r.mean.auc) : json()},
          {"acc", r.mean.acc ? json(*r.mean.acc) : json()},
          {"f1", r.mean.f1 ? json(*r.mean.f1) : json()},
          {"auc_std", r.stdev.auc ? json(*r.stdev.auc) : json()}};
    }
    write_text(fs::path(cfg.out) / "ablate.csv", csv.str());
    std::cout << "wrote " << cfg.out << "/ablate.csv (" << rows.size() << " variants)\n";
  } else if (which == "depth-sweep") {
    std::vector<eval::ExperimentRow> rows = eval::depth_sweep(dataset, cfg.model, cfg.tr);
    std::ostringstream csv;
    csv << eval::experiment_csv_header(true) << "\n";
    json cells = json::array();
    for (const eval::ExperimentRow& r : rows) {
      csv << eval::experiment_csv_row(r, true) << "\n";
      json cell = row_json(r);
      cell["smoothing"] = r.smoothing;
      cells.push_back(std::move(cell));
    }
    write_text(fs::path(cfg.out) / "depth_sweep.csv", csv.str());
    summary["cells"] = std::move(cells);
    std::cout << "wrote " << cfg.out << "/depth_sweep.csv (" << rows.size() << " rows)\n";
  } else if (which == "sensitivity") {
    std::vector<eval::ExperimentRow> rows = eval::sensitivity_sweep(dataset, cfg.model, cfg.tr);
    std::ostringstream csv;
    csv << eval::experiment_csv_header(false) << "\n";
    json cells = json::array();
    for (const eval::ExperimentRow& r : rows) {
      csv << eval::experiment_csv_row(r, false) << "\n";
      cells.push_back(row_json(r));
    }
    write_text(fs::path(cfg.out) / "sensitivity.csv", csv.str());
    summary["cells"] = std::move(cells);
    std::cout << "wrote " << cfg.out << "/sensitivity.csv (" << rows.size() << " rows)\n";
  } else {
    throw UsageError("unknown experiment '" + which +
                     "' (expected ablate, depth-sweep, sensitivity)");
  }
  summary["experiment"] = which;
  write_text(fs::path(cfg.out) / "results.json", summary.dump(2) + "\n");
  return 0;
}

int cmd_toy(const std::string& out, uint64_t seed) {
  data::write_toy_dataset(out, seed);
  std::cout << "wrote " << out << "/toy.csv and " << out << "/toy_expr.tsv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"residual graph-isomorphism network for drug-pair synergy classification"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  std::string variant_name;
  std::string experiment_name;
  uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--data", cfg.data, "sample CSV (or pairs file for predict)");
    cmd->add_option("--cells", cfg.cells, "cell-line expression table");
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--out", cfg.out, "output directory");
    cmd->add_option("--seed", seed, "root random seed");
    cmd->add_option("--folds", cfg.tr.folds, "cross-validation folds");
    cmd->add_option("--layers", cfg.model.gin_layers, "graph layer count");
    cmd->add_option("--variant", variant_name, "resgin | gin-nores | gcn-res");
    cmd->add_option("--lr", cfg.tr.lr, "learning rate");
    cmd->add_option("--dropout", cfg.model.dropout, "dropout rate");
    cmd->add_option("--epochs", cfg.tr.epochs, "training epochs");
    cmd->add_option("--batch", cfg.tr.batch, "training batch size");
    cmd->add_option("--parallel-folds", cfg.tr.parallel_folds, "folds trained concurrently");
    cmd->add_flag("--fail-fast", cfg.fail_fast, "stop at the first bad data row");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "k-fold cross-validated training");
  add_common(train_cmd);

  CLI::App* predict_cmd = app.add_subcommand("predict", "score drug pairs with a checkpoint");
  add_common(predict_cmd);
  predict_cmd->add_option("--ckpt", cfg.ckpt, "checkpoint file from train");

  CLI::App* exp_cmd = app.add_subcommand("experiment", "ablate | depth-sweep | sensitivity");
  exp_cmd->add_option("name", experiment_name, "experiment name")->required();
  add_common(exp_cmd);

  CLI::App* toy_cmd = app.add_subcommand("toy", "write the synthetic toy dataset");
  toy_cmd->add_option("--out", cfg.out, "output directory");
  toy_cmd->add_option("--seed", seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    // flags > config file > defaults
    std::vector<std::string> pinned;
    auto flag_set = [&cmd](const char* flag) {
      const CLI::Option* opt = cmd->get_option_no_throw(flag);
      return opt != nullptr && opt->count() > 0;
    };
    auto pin = [&](const char* flag, const char* key) {
      if (flag_set(flag)) pinned.push_back(key);
    };
    pin("--data", "data");
    pin("--cells", "cells");
    pin("--out", "out");
    pin("--seed", "seed");
    pin("--folds", "n_folds");
    pin("--layers", "layer_count");
    pin("--variant", "variant");
    pin("--lr", "lr");
    pin("--dropout", "dropout");
    pin("--epochs", "num_epochs");
    pin("--batch", "train_batch_size");
    pin("--parallel-folds", "parallel_folds");
    if (flag_set("--seed")) cfg.tr.seed = seed;
    if (!config_path.empty()) apply_config_file(cfg, config_path, pinned);
    if (flag_set("--seed")) cfg.tr.seed = seed;
    if (!variant_name.empty()) {
      try {
        cfg.model.variant = model::variant_from_string(variant_name);
      } catch (const model::ModelError& e) {
        throw UsageError(e.what());
      }
    }

    if (cmd == train_cmd) return cmd_train(cfg);
    if (cmd == predict_cmd) return cmd_predict(cfg);
    if (cmd == exp_cmd) return cmd_experiment(cfg, experiment_name);
    cfg.tr.seed = seed;
    return cmd_toy(cfg.out, cfg.tr.seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << " (see --help)\n";
    return kExitUsage;
  } catch (const train::TrainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const diff::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const data::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const chem::SmilesError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const model::ModelError& e) {
    std::cerr << "checkpoint/model error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
