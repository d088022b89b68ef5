#include "resgin/experiments.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace resgin::eval {

using diff::Tape;
using diff::Tensor;
using diff::Var;

std::vector<Tensor> encode_layers(model::ModelParams& params, const chem::MolecularGraph& graph,
                                  const std::vector<double>& profile) {
  Tape tape;
  Var c = model::embed_cell_line(tape, params, profile);
  Var h = model::init_node_states(tape, tape.input(graph.node_features), c);
  std::vector<Tensor> out;
  for (int k = 0; k < params.config.gin_layers; ++k) {
    Var tilde;
    std::optional<model::AffineParams>* skip = nullptr;
    if (params.config.variant == model::Variant::GcnRes) {
      tilde = model::gcn_layer(tape, h, graph.neighbors, params.gcn[k]);
      skip = &params.gcn[k].skip;
    } else {
      tilde = model::gin_layer(tape, h, graph.neighbors, params.gin[k], 0.0, model::Mode::Infer,
                               nullptr);
      skip = &params.gin[k].skip;
    }
    h = params.config.variant == model::Variant::GinNoRes
            ? tilde
            : model::residual_step(tape, h, tilde, *skip);
    out.push_back(tape.value(h));
  }
  return out;
}

namespace {

/// Mean per-layer smoothing profile over the distinct drug graphs of a
/// dataset (capped for cost; the cap keeps sweep rows cheap and stable).
std::vector<double> dataset_smoothing(model::ModelParams& params, const data::Dataset& dataset,
                                      size_t max_graphs = 24) {
  std::set<std::string> seen;
  std::vector<double> acc(params.config.gin_layers, 0.0);
  size_t used = 0;
  const std::vector<double> zero_profile(dataset.cells.d_gene, 0.0);
  for (const data::SynergySample& s : dataset.samples) {
    if (used >= max_graphs) break;
    if (!seen.insert(s.drug_a).second) continue;
    const std::vector<double> profile =
        eval::smoothing_profile(encode_layers(params, dataset.graph(s.drug_a), zero_profile));
    for (size_t l = 0; l < profile.size(); ++l) acc[l] += profile[l];
    ++used;
  }
  if (used > 0)
    for (double& v : acc) v /= static_cast<double>(used);
  return acc;
}

}  // namespace

ExperimentRow train_eval_cell(const data::Dataset& dataset, const model::ModelConfig& model_cfg,
                              const train::TrainConfig& train_cfg, bool with_smoothing) {
  const data::FoldSplit split =
      data::kfold_split(static_cast<int>(dataset.samples.size()), train_cfg.folds, train_cfg.seed);
  train::FoldResult fold = train::train_fold(dataset, split, 0, model_cfg, train_cfg);
  ExperimentRow row;
  row.variant = model::to_string(model_cfg.variant);
  row.depth = model_cfg.gin_layers;
  row.lr = train_cfg.lr;
  row.dropout = model_cfg.dropout;
  row.metrics = fold.metrics;
  row.final_loss = fold.epoch_losses.back();
  if (with_smoothing) row.smoothing = dataset_smoothing(fold.params, dataset);
  return row;
}

std::vector<ExperimentRow> depth_sweep(const data::Dataset& dataset,
                                       const model::ModelConfig& model_cfg,
                                       const train::TrainConfig& train_cfg,
                                       const std::vector<int>& depths,
                                       const std::vector<model::Variant>& variants) {
  if (depths.empty()) throw EvalError("depth_sweep needs at least one depth");
  std::vector<ExperimentRow> rows;
  for (model::Variant v : variants) {
    for (int depth : depths) {
      model::ModelConfig mc = model_cfg;
      mc.variant = v;
      mc.gin_layers = depth;
      rows.push_back(train_eval_cell(dataset, mc, train_cfg, true));
    }
  }
  return rows;
}

std::vector<ExperimentRow> sensitivity_sweep(const data::Dataset& dataset,
                                             const model::ModelConfig& model_cfg,
                                             const train::TrainConfig& train_cfg,
                                             const std::vector<double>& lrs,
                                             const std::vector<double>& dropouts) {
  if (lrs.empty() || dropouts.empty()) throw EvalError("sensitivity grids must be non-empty");
  std::vector<ExperimentRow> rows;
  for (double lr : lrs) {
    for (double dropout : dropouts) {
      model::ModelConfig mc = model_cfg;
      mc.dropout = dropout;
      train::TrainConfig tc = train_cfg;
      tc.lr = lr;
      rows.push_back(train_eval_cell(dataset, mc, tc, false));
    }
  }
  return rows;
}

std::vector<AblationRow> ablation_run(const data::Dataset& dataset,
                                      const model::ModelConfig& model_cfg,
                                      const train::TrainConfig& train_cfg) {
  std::vector<AblationRow> rows;
  for (model::Variant v :
       {model::Variant::ResGin, model::Variant::GinNoRes, model::Variant::GcnRes}) {
    model::ModelConfig mc = model_cfg;
    mc.variant = v;
    train::CvResult cv = train::run_cv(dataset, mc, train_cfg);
    rows.push_back(AblationRow{model::to_string(v), cv.mean, cv.stdev});
  }
  return rows;
}

std::string random_smiles(Rng& rng) {
  static const char* atoms[] = {"C", "C", "C", "N", "O", "S"};
  std::ostringstream out;
  const int length = 4 + static_cast<int>(rng.below(9));  // 4..12 chain atoms
  const bool ring = rng.uniform() < 0.5 && length >= 6;
  const int ring_open = ring ? static_cast<int>(rng.below(length - 5)) : -1;
  for (int i = 0; i < length; ++i) {
    out << atoms[rng.below(6)];
    if (i == ring_open) out << '1';
    if (ring && i == ring_open + 5) out << '1';
    if (i + 1 < length && rng.uniform() < 0.25) out << '(' << atoms[rng.below(6)] << ')';
  }
  if (rng.uniform() < 0.3) out << "c1ccccc1";
  return out.str();
}

SmoothingAb oversmoothing_ab(int n_graphs, int depth, int d_hidden, uint64_t seed) {
  model::ModelConfig residual_cfg;
  residual_cfg.d_hidden = d_hidden;
  residual_cfg.d_lstm = d_hidden;
  residual_cfg.d_attn = std::max(1, d_hidden / 2);
  residual_cfg.d_middle = std::max(1, d_hidden / 2);
  residual_cfg.gin_layers = depth;
  residual_cfg.d_gene = 1;
  residual_cfg.dropout = 0.0;
  residual_cfg.variant = model::Variant::ResGin;

  model::ModelConfig plain_cfg = residual_cfg;
  plain_cfg.variant = model::Variant::GinNoRes;

  model::ModelParams residual(residual_cfg);
  Rng init(mix_seed(seed, 0x5A));
  residual.init(init);

  // shared initialization: the plain stack borrows every weight it has in
  // common with the residual stack (all except the skip projections)
  model::ModelParams plain(plain_cfg);
  {
    std::vector<diff::Parameter*> source = residual.all();
    for (diff::Parameter* dst : plain.all()) {
      auto it = std::find_if(source.begin(), source.end(),
                             [dst](diff::Parameter* p) { return p->name == dst->name; });
      if (it == source.end()) throw EvalError("shared-init lookup failed for " + dst->name);
      dst->value = (*it)->value;
    }
  }

  const std::vector<double> zero_profile(1, 0.0);
  Rng graph_rng(mix_seed(seed, 0x6B));
  SmoothingAb out;
  out.graphs = n_graphs;
  for (int g = 0; g < n_graphs; ++g) {
    chem::MolecularGraph graph = chem::build_graph(chem::parse_smiles(random_smiles(graph_rng)));
    const std::vector<double> prof_res =
        smoothing_profile(encode_layers(residual, graph, zero_profile));
    const std::vector<double> prof_plain =
        smoothing_profile(encode_layers(plain, graph, zero_profile));
    const double mean_res =
        std::accumulate(prof_res.begin(), prof_res.end(), 0.0) / prof_res.size();
    const double mean_plain =
        std::accumulate(prof_plain.begin(), prof_plain.end(), 0.0) / prof_plain.size();
    if (mean_res > mean_plain) ++out.residual_larger;
    out.mean_residual += mean_res / n_graphs;
    out.mean_plain += mean_plain / n_graphs;
  }
  return out;
}

namespace {

std::string join_smoothing(const std::vector<double>& values) {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) os << ';';
    os << values[i];
  }
  return os.str();
}

std::string metrics_csv(const MetricsReport& m) {
  std::ostringstream os;
  os << metric_to_string(m.auc) << ',' << metric_to_string(m.acc) << ','
     << metric_to_string(m.f1) << ',' << metric_to_string(m.prec) << ','
     << metric_to_string(m.recall) << ',' << metric_to_string(m.bacc) << ','
     << metric_to_string(m.tpr) << ',' << metric_to_string(m.tnr);
  return os.str();
}

}  // namespace

std::string experiment_csv_header(bool with_smoothing) {
  std::string h = "variant,depth,lr,dropout,auc,acc,f1,prec,recall,bacc,tpr,tnr,final_loss";
  if (with_smoothing) h += ",smoothing_profile";
  return h;
}

std::string experiment_csv_row(const ExperimentRow& row, bool with_smoothing) {
  std::ostringstream os;
  os.precision(17);
  os << row.variant << ',' << row.depth << ',' << row.lr << ',' << row.dropout << ','
     << metrics_csv(row.metrics) << ',' << row.final_loss;
  if (with_smoothing) os << ',' << join_smoothing(row.smoothing);
  return os.str();
}

std::string ablation_csv_header() {
  return "variant,auc,acc,f1,prec,recall,bacc,tpr,tnr,"
         "auc_std,acc_std,f1_std,prec_std,recall_std,bacc_std,tpr_std,tnr_std";
}

std::string ablation_csv_row(const AblationRow& row) {
  std::ostringstream os;
  os << row.variant << ',' << metrics_csv(row.mean) << ',' << metrics_csv(row.stdev);
  return os.str();
}

}  // namespace resgin::eval
