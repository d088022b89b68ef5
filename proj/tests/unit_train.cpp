#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "resgin/train.hpp"

using namespace resgin;
using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

/// Small in-memory dataset: a slice of the toy set under a reduced config.
data::Dataset small_dataset(int rows) {
  namespace fs = std::filesystem;
  static fs::path dir;
  if (dir.empty()) {
    dir = fs::temp_directory_path() / "resgin_train_toy";
    data::write_toy_dataset(dir.string(), 11);
  }
  data::Dataset full =
      data::load_dataset((dir / "toy.csv").string(), (dir / "toy_expr.tsv").string());
  // keep a balanced prefix
  data::Dataset subset;
  subset.cells = full.cells;
  int pos = 0, neg = 0;
  for (const data::SynergySample& s : full.samples) {
    if (static_cast<int>(subset.samples.size()) >= rows) break;
    if (s.label == 1 && pos * 2 <= rows) {
      subset.samples.push_back(s);
      ++pos;
    } else if (s.label == 0 && neg * 2 <= rows) {
      subset.samples.push_back(s);
      ++neg;
    }
  }
  for (const data::SynergySample& s : subset.samples) {
    subset.cache.get(s.drug_a);
    subset.cache.get(s.drug_b);
  }
  return subset;
}

model::ModelConfig small_model() {
  model::ModelConfig mc;
  mc.d_hidden = 12;
  mc.d_middle = 6;
  mc.d_attn = 6;
  mc.d_lstm = 12;
  mc.gin_layers = 2;
  mc.dropout = 0.1;
  return mc;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("bce_loss analytic values") {
  CHECK(train::bce_loss(std::vector<double>{0.5}, std::vector<int>{1}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(train::bce_loss(std::vector<double>{1.0 - 1e-7, 1e-7}, std::vector<int>{1, 0}) ==
        doctest::Approx(0.0).epsilon(1e-6));
  CHECK(train::bce_loss(std::vector<double>{0.25}, std::vector<int>{1}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_WITH_AS((void)train::bce_loss({}, {}), doctest::Contains("EmptyBatch"),
                       train::TrainError);
}

TEST_CASE("bce_loss is non-negative") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(8);
    std::vector<int> y(8);
    for (int i = 0; i < 8; ++i) {
      p[i] = rng.uniform();
      y[i] = rng.uniform() < 0.5;
    }
    CHECK(train::bce_loss(p, y) >= 0.0);
  }
}

TEST_CASE("bce gradient w.r.t. the logit is (p - y) / N") {
  Rng rng(2);
  for (int n : {1, 3, 7}) {
    std::vector<diff::Parameter> logits;
    logits.reserve(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      logits.emplace_back("z" + std::to_string(i), Tensor::scalar(rng.uniform(-2.0, 2.0)));
      labels[i] = rng.uniform() < 0.5;
    }
    Tape t;
    Var acc;
    std::vector<double> probs(n);
    for (int i = 0; i < n; ++i) {
      Var p = diff::clamp(diff::sigmoid(t.param(logits[i])), 1e-7, 1.0 - 1e-7);
      probs[i] = t.value(p).data[0];
      Var term = labels[i] ? diff::log(p) : diff::log(diff::add_const(diff::scale(p, -1.0), 1.0));
      acc = i == 0 ? term : diff::add(acc, term);
    }
    t.backward(diff::scale(acc, -1.0 / n));
    for (int i = 0; i < n; ++i) {
      const double expected = (probs[i] - labels[i]) / n;
      CHECK(std::fabs(logits[i].grad.data[0] - expected) < 1e-10);
    }
  }
}

TEST_CASE("adam_step") {
  CHECK(train::TrainConfig{}.lr == 0.0005);  // published default

  diff::Parameter p("p", Tensor::row({1.0, -2.0}));
  std::vector<diff::Parameter*> params{&p};
  train::AdamState state(params);

  // zero gradient leaves parameters untouched
  p.zero_grad();
  train::adam_step(params, state, 0.01);
  CHECK(p.value.data == std::vector<double>{1.0, -2.0});

  // first non-zero step moves by roughly -lr * sign(g)
  train::AdamState fresh(params);
  p.grad.data = {0.37, -1.4};
  train::adam_step(params, fresh, 0.01);
  CHECK(p.value.data[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
  CHECK(p.value.data[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-4));
}

TEST_CASE("config validation") {
  train::TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), train::TrainError);
  c = train::TrainConfig{};
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), train::TrainError);
  c = train::TrainConfig{};
  c.folds = 1;
  CHECK_THROWS_AS(c.validate(), train::TrainError);
}

TEST_CASE("training is deterministic under a fixed seed") {
  data::Dataset ds = small_dataset(40);
  train::TrainConfig tc;
  tc.epochs = 2;
  tc.batch = 16;
  tc.folds = 2;
  tc.seed = 5;
  const data::FoldSplit split = data::kfold_split(static_cast<int>(ds.samples.size()), 2, tc.seed);

  train::FoldResult a = train::train_fold(ds, split, 0, small_model(), tc);
  train::FoldResult b = train::train_fold(ds, split, 0, small_model(), tc);
  CHECK(a.epoch_losses == b.epoch_losses);
  CHECK(a.test_scores == b.test_scores);
}

TEST_CASE("loss falls on the separable toy subset") {
  data::Dataset ds = small_dataset(60);
  train::TrainConfig tc;
  tc.epochs = 8;
  tc.batch = 16;
  tc.folds = 3;
  tc.seed = 3;
  tc.lr = 0.002;
  const data::FoldSplit split = data::kfold_split(static_cast<int>(ds.samples.size()), 3, tc.seed);
  train::FoldResult r = train::train_fold(ds, split, 0, small_model(), tc);
  CHECK(r.epoch_losses.back() < r.epoch_losses.front());
  CHECK(r.test_scores.size() == split.folds[0].size());
}

TEST_CASE("run_cv aggregates folds and stays deterministic") {
  data::Dataset ds = small_dataset(30);
  train::TrainConfig tc;
  tc.epochs = 1;
  tc.batch = 16;
  tc.folds = 3;
  tc.seed = 9;

  int log_lines = 0;
  train::LogFn logger = [&log_lines](const train::EpochLog&) { ++log_lines; };
  train::CvResult cv = train::run_cv(ds, small_model(), tc, logger);
  CHECK(cv.folds.size() == 3);
  CHECK(log_lines == 3);  // one epoch per fold
  CHECK(cv.mean.acc.has_value());

  train::CvResult again = train::run_cv(ds, small_model(), tc);
  for (size_t f = 0; f < cv.folds.size(); ++f)
    CHECK(cv.folds[f].test_scores == again.folds[f].test_scores);
}

TEST_CASE("parallel folds match sequential results") {
  data::Dataset ds = small_dataset(30);
  train::TrainConfig tc;
  tc.epochs = 1;
  tc.batch = 16;
  tc.folds = 3;
  tc.seed = 13;

  train::CvResult seq = train::run_cv(ds, small_model(), tc);
  tc.parallel_folds = 3;
  train::CvResult par = train::run_cv(ds, small_model(), tc);
  REQUIRE(par.folds.size() == seq.folds.size());
  for (size_t f = 0; f < seq.folds.size(); ++f) {
    CHECK(par.folds[f].test_scores == seq.folds[f].test_scores);
    CHECK(par.folds[f].epoch_losses == seq.folds[f].epoch_losses);
  }
}

}  // TEST_SUITE
