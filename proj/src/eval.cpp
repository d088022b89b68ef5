#include "resgin/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace resgin::eval {

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  if (scores.size() != labels.size())
    throw EvalError("LengthMismatch: " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  ConfusionCounts c;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++c.tp;
    else if (predicted && !actual) ++c.fp;
    else if (!predicted && actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

std::optional<double> ratio(long num, long denom) {
  if (denom == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(denom);
}

}  // namespace

MetricsReport classification_metrics(const ConfusionCounts& c, bool paper_tnr) {
  MetricsReport r;
  r.acc = ratio(c.tp + c.tn, c.total());
  r.prec = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.tpr = r.recall;
  r.tnr = paper_tnr ? ratio(c.tn, c.tn + c.fn) : ratio(c.tn, c.tn + c.fp);
  if (r.tpr && r.tnr) r.bacc = (*r.tpr + *r.tnr) / 2.0;
  if (r.prec && r.recall && *r.prec + *r.recall > 0.0)
    r.f1 = 2.0 * *r.prec * *r.recall / (*r.prec + *r.recall);
  return r;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw EvalError("LengthMismatch: " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  long n_pos = 0, n_neg = 0;
  for (int y : labels) (y != 0 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw EvalError("DegenerateLabels: need at least one positive and one negative");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

  // rank sum of positives with average ranks over score ties
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

MetricsReport full_report(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  MetricsReport r = classification_metrics(confusion(scores, labels, threshold));
  long n_pos = 0, n_neg = 0;
  for (int y : labels) (y != 0 ? n_pos : n_neg)++;
  if (n_pos > 0 && n_neg > 0) r.auc = roc_auc(scores, labels);
  return r;
}

std::vector<double> smoothing_profile(const std::vector<diff::Tensor>& per_layer) {
  std::vector<double> out;
  out.reserve(per_layer.size());
  for (const diff::Tensor& h : per_layer) {
    if (h.size() == 0) throw EvalError("smoothing_profile on empty layer matrix");
    const int n = h.rows;
    if (n < 2) {
      out.push_back(0.0);
      continue;
    }
    double total = 0.0;
    long pairs = 0;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        double sq = 0.0;
        const double* ra = h.row_ptr(a);
        const double* rb = h.row_ptr(b);
        for (int j = 0; j < h.cols; ++j) {
          const double d = ra[j] - rb[j];
          sq += d * d;
        }
        total += std::sqrt(sq);
        ++pairs;
      }
    }
    out.push_back(total / static_cast<double>(pairs));
  }
  return out;
}

std::pair<MetricsReport, MetricsReport> aggregate(const std::vector<MetricsReport>& reports) {
  MetricsReport mean, stdev;
  auto field = [](MetricsReport& r, int i) -> std::optional<double>& {
    std::optional<double>* fields[] = {&r.acc, &r.prec, &r.recall, &r.tpr,
                                       &r.tnr, &r.bacc, &r.f1,     &r.auc};
    return *fields[i];
  };
  for (int i = 0; i < 8; ++i) {
    std::vector<double> vals;
    for (const MetricsReport& r : reports) {
      const std::optional<double>& v = field(const_cast<MetricsReport&>(r), i);
      if (v) vals.push_back(*v);
    }
    if (vals.empty()) continue;
    const double m = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    field(mean, i) = m;
    if (vals.size() > 1) {
      double ss = 0.0;
      for (double v : vals) ss += (v - m) * (v - m);
      field(stdev, i) = std::sqrt(ss / (vals.size() - 1));
    } else {
      field(stdev, i) = 0.0;
    }
  }
  return {mean, stdev};
}

std::string metric_to_string(const std::optional<double>& m) {
  if (!m) return "undefined";
  std::ostringstream os;
  os.precision(17);
  os << *m;
  return os.str();
}

}  // namespace resgin::eval
