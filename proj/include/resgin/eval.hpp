#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resgin/tensor.hpp"

namespace resgin::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfusionCounts {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;

  long total() const { return tp + tn + fp + fn; }
};

/// Scores at or above `threshold` count as positive predictions.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold = 0.5);

/// Metrics with zero denominators stay unset rather than turning into NaN.
struct MetricsReport {
  std::optional<double> acc, prec, recall, tpr, tnr, bacc, f1, auc;
};

/// ACC/PREC/RECALL/TPR plus specificity-style TNR = tn/(tn+fp), BACC and F1.
/// `paper_tnr` switches TNR (and BACC with it) to the tn/(tn+fn) form some
/// write-ups print.
MetricsReport classification_metrics(const ConfusionCounts& c, bool paper_tnr = false);

/// Mann-Whitney concordance: fraction of (positive, negative) pairs ranked
/// correctly, ties counted one half. Needs both classes present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

MetricsReport full_report(std::span<const double> scores, std::span<const int> labels,
                          double threshold = 0.5);

/// Per-layer mean pairwise Euclidean distance between node rows; zero for
/// single-node matrices.
std::vector<double> smoothing_profile(const std::vector<diff::Tensor>& per_layer);

/// Mean and sample standard deviation per metric across reports; metrics
/// undefined in a report are skipped for that metric.
std::pair<MetricsReport, MetricsReport> aggregate(const std::vector<MetricsReport>& reports);

std::string metric_to_string(const std::optional<double>& m);

}  // namespace resgin::eval
