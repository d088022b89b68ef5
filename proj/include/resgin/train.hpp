#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resgin/data.hpp"
#include "resgin/eval.hpp"
#include "resgin/model.hpp"

namespace resgin::train {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr = 0.0005;
  int epochs = 200;
  int batch = 128;
  int folds = 5;
  uint64_t seed = 0;
  int parallel_folds = 1;

  void validate() const;
};

/// Mean binary cross-entropy; probabilities are clamped to [1e-7, 1 - 1e-7]
/// before the logs.
double bce_loss(std::span<const double> p, std::span<const int> y);

/// First/second moment buffers per parameter plus the shared step counter.
struct AdamState {
  std::vector<diff::Tensor> m;
  std::vector<diff::Tensor> v;
  long step = 0;

  explicit AdamState(std::span<diff::Parameter* const> params);
};

/// Bias-corrected Adam update from each parameter's current grad.
void adam_step(std::span<diff::Parameter* const> params, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct EpochLog {
  int fold = 0;
  int epoch = 0;
  double loss = 0.0;
  double seconds = 0.0;
};

using LogFn = std::function<void(const EpochLog&)>;

struct FoldResult {
  int fold = 0;
  std::vector<double> epoch_losses;
  std::vector<double> epoch_seconds;
  std::vector<double> test_scores;
  std::vector<int> test_labels;
  eval::MetricsReport metrics;
  model::ModelParams params;
};

/// Trains on every fold except `fold_idx`, evaluates on the held-out fold.
/// Deterministic for a fixed (config, seed): all randomness is derived from
/// TrainConfig::seed and the fold index.
FoldResult train_fold(const data::Dataset& dataset, const data::FoldSplit& split, int fold_idx,
                      const model::ModelConfig& model_cfg, const TrainConfig& cfg,
                      const LogFn& log = nullptr);

struct CvResult {
  std::vector<FoldResult> folds;
  eval::MetricsReport mean;
  eval::MetricsReport stdev;
};

/// Full k-fold protocol: every sample is tested exactly once; reports the
/// per-metric mean and sample standard deviation across folds. Fold logs are
/// emitted in fold order even when folds run in parallel.
CvResult run_cv(const data::Dataset& dataset, const model::ModelConfig& model_cfg,
                const TrainConfig& cfg, const LogFn& log = nullptr);

}  // namespace resgin::train
