#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ntmp/datagen.hpp"
#include "ntmp/train.hpp"

using namespace ntmp;
using namespace ntmp::model;

namespace {

constexpr double kBayesAccuracy = 0.8413447460685429;  // Phi(1) for the +-1 mean task

datagen::GaussianTaskSpec default_task() {
  datagen::GaussianTaskSpec spec;
  spec.dim = 2;
  spec.prior_pi = 0.5;
  spec.mean_pos = {1.0, 0.0};
  spec.mean_neg = {-1.0, 0.0};
  return spec;
}

struct TaskData {
  datagen::BuiltTuples built;
  UnlabeledPool pool;
  LabeledPool test;
};

TaskData make_task_data(std::size_t n_tuples, RngSeed seed, std::size_t test_size = 20000) {
  TaskData d;
  auto gen_pool = datagen::gen_gaussian_pool(default_task(), 8 * n_tuples, seed);
  datagen::TupleBuildSpec tspec;
  tspec.n = 3;
  tspec.m = 1;
  tspec.n_tuples = n_tuples;
  d.built = datagen::build_tuples(gen_pool, tspec, derive_seed(seed, 1));
  d.pool = strip_labels(datagen::gen_gaussian_pool(default_task(), 3 * n_tuples, derive_seed(seed, 2)));
  d.test = datagen::gen_gaussian_pool(default_task(), test_size, derive_seed(seed, 3));
  return d;
}

double test_accuracy(const Scorer& g, const LabeledPool& test) {
  std::size_t correct = 0;
  for (const auto& s : test.samples) {
    correct += g.predict(s.features) == *s.label;
  }
  return static_cast<double>(correct) / static_cast<double>(test.samples.size());
}

TrainConfig linear_config(RngSeed seed) {
  TrainConfig tcfg;
  tcfg.scorer.kind = ScorerKind::Linear;
  tcfg.scorer.input_dim = 2;
  tcfg.seed = seed;
  return tcfg;
}

}  // namespace

TEST_CASE("zero epochs returns the initial scorer unchanged") {
  auto d = make_task_data(100, RngSeed{11}, 100);
  auto tcfg = linear_config(RngSeed{12});
  tcfg.epochs = 0;
  risk::MixConfig cfg;
  cfg.pi = 0.5;
  auto result = train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg);
  CHECK(result.trace.empty());
  for (double p : result.scorer.params()) CHECK(p == 0.0);
}

TEST_CASE("training is bit-reproducible") {
  auto d = make_task_data(120, RngSeed{21}, 100);
  auto tcfg = linear_config(RngSeed{22});
  tcfg.epochs = 5;
  tcfg.batch_tuples = 16;
  risk::MixConfig cfg;
  cfg.pi = 0.5;
  auto a = train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg);
  auto b = train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg);
  CHECK(a.scorer.params() == b.scorer.params());
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].risk_unclamped == b.trace[i].risk_unclamped);
    CHECK(a.trace[i].risk_clamped == b.trace[i].risk_clamped);
  }

  tcfg.seed = RngSeed{23};
  auto c = train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg);
  CHECK(a.scorer.params() != c.scorer.params());
}

TEST_CASE("trained scorer approaches the optimal accuracy on the gaussian task") {
  risk::MixConfig cfg;
  cfg.pi = 0.5;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto d = make_task_data(500, RngSeed{100 + seed});
    auto tcfg = linear_config(RngSeed{200 + seed});
    tcfg.clamp_kind = ClampKind::Abs;
    tcfg.learning_rate = 1e-3;
    auto result = train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg);
    double acc = test_accuracy(result.scorer, d.test);
    CHECK(acc >= 0.95 * kBayesAccuracy);
  }
}

TEST_CASE("abs clamp holds up against the unclamped objective on small data") {
  // The clamp only engages when a class piece dips negative, so on a
  // well-specified run it can at worst match the unclamped twin; the
  // contract is no-harm at matched seeds.
  risk::MixConfig cfg;
  cfg.pi = 0.5;
  int abs_wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto d = make_task_data(500, RngSeed{300 + seed}, 10000);
    auto tcfg = linear_config(RngSeed{400 + seed});
    tcfg.learning_rate = 1e-3;
    tcfg.epochs = 150;

    tcfg.clamp_kind = ClampKind::Abs;
    auto abs_run = train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg);
    tcfg.clamp_kind = ClampKind::None;
    auto none_run = train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg);
    if (test_accuracy(abs_run.scorer, d.test) >= test_accuracy(none_run.scorer, d.test)) {
      ++abs_wins;
    }
  }
  CHECK(abs_wins >= 4);
}

TEST_CASE("supervised twin reaches the closed-form accuracy") {
  auto labeled = datagen::gen_gaussian_pool(default_task(), 4000, RngSeed{51});
  auto test = datagen::gen_gaussian_pool(default_task(), 100000, RngSeed{52});
  auto tcfg = linear_config(RngSeed{53});
  tcfg.learning_rate = 1e-3;
  auto result = train_supervised(labeled.samples, LossSpec::logistic(), tcfg);
  double acc = test_accuracy(result.scorer, test);
  CHECK(std::abs(acc - kBayesAccuracy) <= 0.01);
  // Risk goes down over training.
  CHECK(result.trace.back().risk_unclamped < result.trace.front().risk_unclamped);
}

TEST_CASE("audit labels add an accuracy column") {
  auto d = make_task_data(100, RngSeed{61}, 100);
  auto tcfg = linear_config(RngSeed{62});
  tcfg.epochs = 3;
  tcfg.batch_tuples = 32;
  risk::MixConfig cfg;
  cfg.pi = 0.5;
  auto result =
      train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg, &d.built.audit.labels);
  REQUIRE(result.trace.size() == 3);
  for (const auto& row : result.trace) {
    REQUIRE(row.audit_accuracy.has_value());
    CHECK(*row.audit_accuracy >= 0.0);
    CHECK(*row.audit_accuracy <= 1.0);
  }
}

TEST_CASE("rate collisions propagate or split depending on plan mode") {
  auto pool = datagen::gen_gaussian_pool(default_task(), 4000, RngSeed{71});
  datagen::TupleBuildSpec tspec;
  tspec.n = 2;
  tspec.m = 1;
  tspec.n_tuples = 100;
  auto built = datagen::build_tuples(pool, tspec, RngSeed{72});
  auto upool = strip_labels(datagen::gen_gaussian_pool(default_task(), 600, RngSeed{73}));

  risk::MixConfig cfg;
  cfg.pi = 0.5;
  auto tcfg = linear_config(RngSeed{74});
  tcfg.epochs = 2;
  tcfg.batch_tuples = 20;
  tcfg.plan_mode = PlanMode::Pooled;
  CHECK_THROWS_AS(train_ntmp(built.dataset, upool, cfg, LossSpec::sigmoid(), tcfg),
                  risk::IllConditionedError);
  tcfg.plan_mode = PlanMode::Auto;
  CHECK_THROWS_AS(train_ntmp(built.dataset, upool, cfg, LossSpec::sigmoid(), tcfg),
                  risk::UnsplittableDegenerateError);

  // Mixed rates averaging exactly to pi: Auto splits and trains.
  datagen::TupleBuildSpec mixed;
  mixed.n_tuples = 400;
  mixed.variable_nm = std::vector<datagen::TupleConfigWeight>{{3, 1, 0.5}, {3, 2, 0.5}};
  auto built2 = datagen::build_tuples(pool, mixed, RngSeed{75});
  REQUIRE(risk::effective_alpha(built2.dataset) == doctest::Approx(0.5).epsilon(1e-15));
  tcfg.epochs = 60;
  tcfg.batch_tuples = 64;
  tcfg.learning_rate = 1e-3;
  auto result = train_ntmp(built2.dataset, upool, cfg, LossSpec::sigmoid(), tcfg);
  REQUIRE(result.plan.strata.size() == 2);
  CHECK(result.plan.strata[0].alpha_bar == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(result.plan.strata[1].alpha_bar == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  auto test = datagen::gen_gaussian_pool(default_task(), 20000, RngSeed{76});
  CHECK(test_accuracy(result.scorer, test) >= 0.7);
}

TEST_CASE("divergence aborts with a diagnostic") {
  auto d = make_task_data(20, RngSeed{81}, 100);
  auto tcfg = linear_config(RngSeed{82});
  tcfg.optimizer = Optimizer::Sgd;
  tcfg.learning_rate = 1e5;
  tcfg.weight_decay = 1.0;
  tcfg.batch_tuples = 10;
  risk::MixConfig cfg;
  cfg.pi = 0.5;
  try {
    train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::squared_hinge(), tcfg);
    FAIL("expected divergence");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("batch size validation") {
  auto d = make_task_data(10, RngSeed{91}, 100);
  auto tcfg = linear_config(RngSeed{92});
  tcfg.batch_tuples = 64;  // only 10 tuples available
  risk::MixConfig cfg;
  cfg.pi = 0.5;
  CHECK_THROWS_AS(train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg),
                  std::invalid_argument);
  tcfg.batch_tuples = 4;
  tcfg.batch_unlabeled = d.pool.samples.size() + 1;
  CHECK_THROWS_AS(train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg),
                  std::invalid_argument);
  tcfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train_ntmp(d.built.dataset, d.pool, cfg, LossSpec::sigmoid(), tcfg),
                  std::invalid_argument);
}

TEST_CASE("prediction helpers") {
  auto tcfg = linear_config(RngSeed{93});
  Rng rng(RngSeed{94});
  auto g = Scorer::make(tcfg.scorer, rng);
  g.params() = {1.0, 0.0, 0.0};
  std::vector<InstanceSample> xs = {{{0.5, 0.0}, std::nullopt},
                                    {{-0.2, 0.0}, std::nullopt},
                                    {{0.0, 0.0}, std::nullopt}};
  CHECK(predict_labels(g, xs) == std::vector<int>{1, -1, -1});
  CHECK(predict_labels(g, xs, 1e9) == std::vector<int>{-1, -1, -1});
}

TEST_CASE("trace serializes to csv") {
  std::vector<TraceRow> trace;
  trace.push_back({1, 0.625, 0.75, std::nullopt});
  trace.push_back({2, 0.5, 0.5, 0.875});
  std::ostringstream os;
  write_trace_csv(os, trace);
  CHECK(os.str() ==
        "epoch,risk_unclamped,risk_clamped,audit_accuracy\n"
        "1,0.625,0.75,\n"
        "2,0.5,0.5,0.875\n");
}
