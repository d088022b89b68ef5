#include "resgin/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace resgin::train {

using diff::Tape;
using diff::Tensor;
using diff::Var;

void TrainConfig::validate() const {
  if (lr <= 0.0) throw TrainError("learning rate must be positive");
  if (epochs < 1) throw TrainError("epochs must be >= 1");
  if (batch < 1) throw TrainError("batch size must be >= 1");
  if (folds < 2) throw TrainError("folds must be >= 2");
  if (parallel_folds < 1) throw TrainError("parallel_folds must be >= 1");
}

double bce_loss(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size())
    throw TrainError("bce_loss length mismatch: " + std::to_string(p.size()) + " vs " +
                     std::to_string(y.size()));
  if (p.empty()) throw TrainError("EmptyBatch: bce_loss over zero samples");
  double total = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double pi = std::clamp(p[i], 1e-7, 1.0 - 1e-7);
    total += y[i] != 0 ? std::log(pi) : std::log(1.0 - pi);
  }
  return -total / static_cast<double>(p.size());
}

AdamState::AdamState(std::span<diff::Parameter* const> params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const diff::Parameter* p : params) {
    m.emplace_back(p->value.rows, p->value.cols);
    v.emplace_back(p->value.rows, p->value.cols);
  }
}

void adam_step(std::span<diff::Parameter* const> params, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  if (params.size() != state.m.size())
    throw diff::ShapeError("optimizer state does not match parameter list");
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    diff::Parameter& p = *params[i];
    if (!p.grad.same_shape(p.value))
      throw diff::ShapeError("gradient shape mismatch for " + p.name);
    Tensor& mi = state.m[i];
    Tensor& vi = state.v[i];
    for (int j = 0; j < p.value.size(); ++j) {
      const double g = p.grad.data[j];
      mi.data[j] = beta1 * mi.data[j] + (1.0 - beta1) * g;
      vi.data[j] = beta2 * vi.data[j] + (1.0 - beta2) * g * g;
      const double m_hat = mi.data[j] / bc1;
      const double v_hat = vi.data[j] / bc2;
      p.value.data[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

namespace {

/// -(1/N) * sum(y log p + (1-y) log(1-p)) assembled on the tape.
Var batch_loss(Tape& tape, const std::vector<Var>& probs, const std::vector<int>& labels) {
  Var acc;
  for (size_t i = 0; i < probs.size(); ++i) {
    Var term = labels[i] != 0 ? diff::log(probs[i])
                              : diff::log(diff::add_const(diff::scale(probs[i], -1.0), 1.0));
    acc = i == 0 ? term : diff::add(acc, term);
  }
  return diff::scale(acc, -1.0 / static_cast<double>(probs.size()));
}

}  // namespace

FoldResult train_fold(const data::Dataset& dataset, const data::FoldSplit& split, int fold_idx,
                      const model::ModelConfig& model_cfg, const TrainConfig& cfg,
                      const LogFn& log) {
  cfg.validate();
  if (fold_idx < 0 || fold_idx >= split.fold_count())
    throw TrainError("fold index " + std::to_string(fold_idx) + " out of range");

  model::ModelConfig mc = model_cfg;
  mc.d_gene = dataset.cells.d_gene;
  mc.validate();

  FoldResult result{.fold = fold_idx, .params = model::ModelParams(mc)};
  Rng init_rng(mix_seed(cfg.seed, 0x10, static_cast<uint64_t>(fold_idx)));
  result.params.init(init_rng);
  model::ModelParams& params = result.params;

  std::vector<diff::Parameter*> plist = params.all();
  AdamState adam(plist);
  Rng dropout_rng(mix_seed(cfg.seed, 0xD0, static_cast<uint64_t>(fold_idx)));

  const std::vector<int> train_idx = split.train_indices(fold_idx);
  if (train_idx.empty()) throw TrainError("empty training split");

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const uint64_t batch_seed =
        mix_seed(cfg.seed, 0xB0 + static_cast<uint64_t>(fold_idx), static_cast<uint64_t>(epoch));
    double loss_sum = 0.0;
    for (const std::vector<int>& batch : data::batch_iter(train_idx, cfg.batch, true, batch_seed)) {
      Tape tape;
      std::vector<Var> probs;
      std::vector<int> labels;
      probs.reserve(batch.size());
      labels.reserve(batch.size());
      for (int idx : batch) {
        const data::SynergySample& s = dataset.samples[idx];
        model::ForwardVars fv =
            model::forward_on_tape(tape, params, dataset.graph(s.drug_a), dataset.graph(s.drug_b),
                                   dataset.cells.profile(s.cell_line), model::Mode::Train,
                                   &dropout_rng);
        probs.push_back(fv.p);
        labels.push_back(s.label);
      }
      Var loss = batch_loss(tape, probs, labels);
      tape.backward(loss);
      adam_step(plist, adam, cfg.lr);
      loss_sum += tape.value(loss).data[0] * static_cast<double>(batch.size());
    }
    const double epoch_loss = loss_sum / static_cast<double>(train_idx.size());
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epoch_losses.push_back(epoch_loss);
    result.epoch_seconds.push_back(seconds);
    if (log) log(EpochLog{fold_idx, epoch, epoch_loss, seconds});
  }

  for (int idx : split.folds[fold_idx]) {
    const data::SynergySample& s = dataset.samples[idx];
    model::ForwardOutput out =
        model::forward(params, dataset.graph(s.drug_a), dataset.graph(s.drug_b),
                       dataset.cells.profile(s.cell_line), model::Mode::Infer);
    result.test_scores.push_back(out.p);
    result.test_labels.push_back(s.label);
  }
  result.metrics = eval::full_report(result.test_scores, result.test_labels);
  return result;
}

CvResult run_cv(const data::Dataset& dataset, const model::ModelConfig& model_cfg,
                const TrainConfig& cfg, const LogFn& log) {
  cfg.validate();
  if (dataset.samples.empty()) throw TrainError("dataset is empty");
  const data::FoldSplit split =
      data::kfold_split(static_cast<int>(dataset.samples.size()), cfg.folds, cfg.seed);

  CvResult result;
  result.folds.reserve(cfg.folds);
  std::vector<std::vector<EpochLog>> fold_logs(cfg.folds);

  if (cfg.parallel_folds <= 1) {
    for (int f = 0; f < cfg.folds; ++f) {
      auto collect = [&fold_logs, f](const EpochLog& e) { fold_logs[f].push_back(e); };
      result.folds.push_back(train_fold(dataset, split, f, model_cfg, cfg, collect));
    }
  } else {
    std::vector<std::optional<FoldResult>> slots(cfg.folds);
    std::vector<std::string> errors(cfg.folds);
    std::vector<std::thread> pool;
    const int width = std::min(cfg.parallel_folds, cfg.folds);
    for (int w = 0; w < width; ++w) {
      pool.emplace_back([&, w]() {
        for (int f = w; f < cfg.folds; f += width) {
          try {
            auto collect = [&fold_logs, f](const EpochLog& e) { fold_logs[f].push_back(e); };
            slots[f] = train_fold(dataset, split, f, model_cfg, cfg, collect);
          } catch (const std::exception& e) {
            errors[f] = e.what();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (int f = 0; f < cfg.folds; ++f) {
      if (!errors[f].empty()) throw TrainError("fold " + std::to_string(f) + ": " + errors[f]);
      result.folds.push_back(std::move(*slots[f]));
    }
  }

  if (log)
    for (const std::vector<EpochLog>& logs : fold_logs)
      for (const EpochLog& e : logs) log(e);

  std::vector<eval::MetricsReport> reports;
  reports.reserve(result.folds.size());
  for (const FoldResult& f : result.folds) reports.push_back(f.metrics);
  auto [mean, stdev] = eval::aggregate(reports);
  result.mean = mean;
  result.stdev = stdev;
  return result;
}

}  // namespace resgin::train
