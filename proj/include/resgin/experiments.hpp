#pragma once

#include <string>
#include <vector>

#include "resgin/train.hpp"

namespace resgin::eval {

/// Per-layer node matrices of one drug graph under the model's graph encoder
/// (no LSTM/attention), for over-smoothing analysis.
std::vector<diff::Tensor> encode_layers(model::ModelParams& params,
                                        const chem::MolecularGraph& graph,
                                        const std::vector<double>& profile);

struct ExperimentRow {
  std::string variant;
  int depth = 0;
  double lr = 0.0;
  double dropout = 0.0;
  MetricsReport metrics;
  std::vector<double> smoothing;  // per-layer, empty unless requested
  double final_loss = 0.0;
};

/// Hold-one-fold evaluation used by the sweep runners: trains on folds
/// 1..k-1, tests on fold 0.
ExperimentRow train_eval_cell(const data::Dataset& dataset, const model::ModelConfig& model_cfg,
                              const train::TrainConfig& train_cfg, bool with_smoothing = false);

/// (variant x depth) grid under identical seeds, metrics plus the trained
/// model's smoothing profile over the dataset's drug graphs.
std::vector<ExperimentRow> depth_sweep(const data::Dataset& dataset,
                                       const model::ModelConfig& model_cfg,
                                       const train::TrainConfig& train_cfg,
                                       const std::vector<int>& depths = {1, 2, 3, 4},
                                       const std::vector<model::Variant>& variants = {
                                           model::Variant::ResGin, model::Variant::GinNoRes,
                                           model::Variant::GcnRes});

/// Full lr x dropout Cartesian product under a fixed seed.
std::vector<ExperimentRow> sensitivity_sweep(const data::Dataset& dataset,
                                             const model::ModelConfig& model_cfg,
                                             const train::TrainConfig& train_cfg,
                                             const std::vector<double>& lrs = {5e-5, 5e-4, 5e-3},
                                             const std::vector<double>& dropouts = {0.1, 0.2, 0.3,
                                                                                    0.4});

struct AblationRow {
  std::string variant;
  MetricsReport mean;
  MetricsReport stdev;
};

/// resgin / gin-nores / gcn-res under a shared seed (hence shared folds).
std::vector<AblationRow> ablation_run(const data::Dataset& dataset,
                                      const model::ModelConfig& model_cfg,
                                      const train::TrainConfig& train_cfg);

/// Random molecule-like SMILES for synthetic graph corpora: chains with
/// branches and an occasional aromatic ring.
std::string random_smiles(Rng& rng);

struct SmoothingAb {
  int graphs = 0;
  int residual_larger = 0;  // graphs where the residual stack smooths less
  double mean_residual = 0.0;
  double mean_plain = 0.0;

  double fraction_residual_larger() const {
    return graphs == 0 ? 0.0 : static_cast<double>(residual_larger) / graphs;
  }
};

/// Untrained A/B comparison at a given depth: residual vs plain GIN stacks
/// with identical (shared) initialization over random molecular graphs. The
/// compared statistic is each graph's mean over layers of the per-layer mean
/// pairwise node distance.
SmoothingAb oversmoothing_ab(int n_graphs, int depth, int d_hidden, uint64_t seed);

std::string experiment_csv_header(bool with_smoothing);
std::string experiment_csv_row(const ExperimentRow& row, bool with_smoothing);
std::string ablation_csv_header();
std::string ablation_csv_row(const AblationRow& row);

}  // namespace resgin::eval
