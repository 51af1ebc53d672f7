#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ntmp/datagen.hpp"
#include "ntmp/eval.hpp"
#include "ntmp/prior.hpp"

using namespace ntmp;
using namespace ntmp::prior;

namespace {

std::vector<double> gauss_draws(std::size_t n, double mu, double sigma, Rng& rng) {
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.normal(mu, sigma));
  return out;
}

std::vector<double> mixture_draws(std::size_t n_pos, std::size_t n_neg, double mu_pos,
                                  double mu_neg, Rng& rng) {
  auto out = gauss_draws(n_pos, mu_pos, 1.0, rng);
  auto neg = gauss_draws(n_neg, mu_neg, 1.0, rng);
  out.insert(out.end(), neg.begin(), neg.end());
  return out;
}

std::vector<InstanceSample> blob(std::size_t n, double mx, double my, Rng& rng) {
  std::vector<InstanceSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({{rng.normal(mx, 1.0), rng.normal(my, 1.0)}, std::nullopt});
  }
  return out;
}

datagen::GaussianTaskSpec default_task() {
  datagen::GaussianTaskSpec spec;
  spec.dim = 2;
  spec.prior_pi = 0.5;
  spec.mean_pos = {1.0, 0.0};
  spec.mean_neg = {-1.0, 0.0};
  return spec;
}

struct SweepTask {
  datagen::BuiltTuples built;
  UnlabeledPool pool;
  LabeledPool audit;
};

SweepTask make_sweep_task(std::size_t n_tuples, std::size_t n, std::size_t m, RngSeed seed,
                          std::size_t audit_size) {
  SweepTask t;
  auto gen_pool = datagen::gen_gaussian_pool(default_task(), 8 * n_tuples, seed);
  datagen::TupleBuildSpec tspec;
  tspec.n = n;
  tspec.m = m;
  tspec.n_tuples = n_tuples;
  t.built = datagen::build_tuples(gen_pool, tspec, derive_seed(seed, 1));
  t.pool = strip_labels(datagen::gen_gaussian_pool(default_task(), 3 * n_tuples, derive_seed(seed, 2)));
  t.audit = datagen::gen_gaussian_pool(default_task(), audit_size, derive_seed(seed, 3));
  return t;
}

std::vector<int> audit_labels(const LabeledPool& pool) {
  std::vector<int> out;
  out.reserve(pool.samples.size());
  for (const auto& s : pool.samples) out.push_back(*s.label);
  return out;
}

prior::SweepConfig linear_sweep_config() {
  prior::SweepConfig cfg;
  cfg.train.scorer.kind = model::ScorerKind::Linear;
  cfg.train.scorer.input_dim = 2;
  cfg.train.epochs = 30;
  cfg.train.learning_rate = 1e-3;
  cfg.train.batch_tuples = 16;
  cfg.seeds = 3;
  cfg.bootstrap_b = 500;
  return cfg;
}

}  // namespace

TEST_CASE("clopper pearson pins exact binomial bands") {
  auto mid = clopper_pearson(5, 10);
  CHECK(mid.low == doctest::Approx(0.18708602844739855).epsilon(1e-10));
  CHECK(mid.high == doctest::Approx(0.8129139715526015).epsilon(1e-10));

  auto all = clopper_pearson(10, 10);
  CHECK(all.high == 1.0);
  CHECK(all.low == doctest::Approx(std::pow(0.025, 0.1)).epsilon(1e-12));

  auto none = clopper_pearson(0, 10);
  CHECK(none.low == 0.0);
  CHECK(none.high == doctest::Approx(1.0 - std::pow(0.025, 0.1)).epsilon(1e-12));

  // Beta(1, 1) is uniform, so one trial with no successes caps at the
  // interval level itself.
  CHECK(clopper_pearson(0, 1).high == doctest::Approx(0.975).epsilon(1e-12));

  auto band = clopper_pearson(3, 12);
  CHECK(band.low > 0.0);
  CHECK(band.low < 0.25);
  CHECK(band.high > 0.25);
  CHECK(band.high < 1.0);

  CHECK_THROWS_AS(clopper_pearson(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(clopper_pearson(11, 10), std::invalid_argument);
}

TEST_CASE("silverman bandwidth follows the reference rule") {
  CHECK(silverman_bandwidth({1.0, 2.0, 3.0, 4.0, 5.0}) ==
        doctest::Approx(0.9735846228506357).epsilon(1e-12));

  // One outlier collapses the interquartile range; the sd alone keeps
  // the bandwidth positive.
  std::vector<double> spiky{0.0, 0.0, 0.0, 0.0, 1.0};
  double expected = 0.9 * sample_stddev(spiky) * std::pow(5.0, -0.2);
  CHECK(silverman_bandwidth(spiky) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(silverman_bandwidth(spiky) > 0.0);

  CHECK_THROWS_AS(silverman_bandwidth({2.0, 2.0, 2.0}), DegenerateBandwidthError);
  CHECK_THROWS_AS(silverman_bandwidth({1.0}), DegenerateBandwidthError);
  CHECK_THROWS_AS(silverman_bandwidth({}), DegenerateBandwidthError);
}

TEST_CASE("isotonic fit merges violators by averaging") {
  CHECK(isotonic_nondecreasing({1.0, 3.0, 2.0}) == std::vector<double>{1.0, 2.5, 2.5});
  CHECK(isotonic_nondecreasing({3.0, 1.0, 2.0}) == std::vector<double>{2.0, 2.0, 2.0});

  std::vector<double> sorted{-1.0, 0.0, 0.0, 2.0};
  CHECK(isotonic_nondecreasing(sorted) == sorted);
  CHECK(isotonic_nondecreasing({}).empty());

  Rng rng(91);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> values = gauss_draws(40, 0.0, 2.0, rng);
    auto fit = isotonic_nondecreasing(values);
    REQUIRE(fit.size() == values.size());
    double sum_in = 0.0, sum_out = 0.0;
    for (std::size_t i = 0; i < fit.size(); ++i) {
      if (i > 0) CHECK(fit[i] >= fit[i - 1]);
      sum_in += values[i];
      sum_out += fit[i];
    }
    CHECK(sum_out == doctest::Approx(sum_in).epsilon(1e-9));
    CHECK(isotonic_nondecreasing(fit) == fit);
  }
}

TEST_CASE("threshold gap bound reads designed separations") {
  Rng rng(42);
  auto far_proxy = gauss_draws(400, 5.0, 0.2, rng);
  auto far_unl = gauss_draws(400, 0.0, 0.2, rng);
  auto separated = np_lower_bound(far_proxy, far_unl);
  CHECK(separated.value == 1.0);
  CHECK(separated.band.high == 1.0);
  CHECK(separated.band.low > 0.9);
  // Ties across the whole gap resolve to the first maximizing
  // threshold, right above the unlabeled cloud.
  CHECK(separated.threshold > 0.0);
  CHECK(separated.threshold < 4.5);

  auto same = gauss_draws(500, 0.0, 1.0, rng);
  CHECK(np_lower_bound(same, same).value == 0.0);

  // Unit-variance gaussians one mean apart: the best threshold sits
  // halfway and the gap there is 2*Phi(1/2) - 1.
  auto proxy = gauss_draws(10000, 1.0, 1.0, rng);
  auto unl = gauss_draws(10000, 0.0, 1.0, rng);
  auto overlap = np_lower_bound(proxy, unl);
  CHECK(overlap.value > 0.353);
  CHECK(overlap.value < 0.413);
  CHECK(std::abs(overlap.threshold - 0.5) < 0.15);
  CHECK(overlap.band.low <= overlap.value);
  CHECK(overlap.band.high >= overlap.value);
  CHECK(overlap.band.low >= 0.0);
  CHECK(overlap.band.high <= 1.0);

  CHECK_THROWS_AS(np_lower_bound({}, same), std::invalid_argument);
  CHECK_THROWS_AS(np_lower_bound(same, {}), std::invalid_argument);
}

TEST_CASE("mixture proportion estimate recovers designed mixtures") {
  Rng rng(7);
  auto scores = gauss_draws(2000, 0.0, 1.0, rng);
  auto saturated = mpe_estimate(scores, scores, RngSeed{11});
  CHECK(saturated.pi_hat == 1.0);
  CHECK(saturated.ci_high == 1.0);
  CHECK(saturated.ci_low <= 1.0);
  CHECK(saturated.ci_low >= 0.0);
  CHECK(saturated.np_lower_bound >= 0.0);
  CHECK(saturated.np_lower_bound <= 1.0);

  Rng mix_rng(21);
  auto proxy = gauss_draws(10000, 2.0, 1.0, mix_rng);
  auto unl = mixture_draws(3000, 7000, 2.0, -3.0, mix_rng);
  auto est = mpe_estimate(proxy, unl, RngSeed{22});
  CHECK(est.pi_hat > 0.25);
  CHECK(est.pi_hat < 0.35);
  CHECK(est.ci_low <= est.pi_hat);
  CHECK(est.ci_high >= est.pi_hat);
  CHECK(est.ci_low >= 0.0);
  CHECK(est.ci_high <= 1.0);
  CHECK(est.np_lower_bound >= 0.0);
  CHECK(est.np_lower_bound <= 1.0);
  CHECK(est.lb_ci_low <= est.lb_ci_high);

  std::vector<double> flat(100, 1.5);
  CHECK_THROWS_AS(mpe_estimate(flat, flat, RngSeed{3}), DegenerateBandwidthError);
}

TEST_CASE("bootstrap interval covers a known mixing weight") {
  MpeOptions opts;
  opts.bootstrap_b = 400;
  std::size_t covered = 0;
  double pi_sum = 0.0;
  for (std::uint64_t rep = 0; rep < 60; ++rep) {
    Rng rng(1000 + rep);
    auto proxy = gauss_draws(4000, 2.0, 1.0, rng);
    auto unl = mixture_draws(1200, 2800, 2.0, -3.0, rng);
    auto est = mpe_estimate(proxy, unl, opts, RngSeed{500 + rep});
    covered += (est.ci_low <= 0.3 && 0.3 <= est.ci_high);
    pi_sum += est.pi_hat;
  }
  CHECK(covered >= 51);
  double pi_mean = pi_sum / 60.0;
  CHECK(pi_mean > 0.25);
  CHECK(pi_mean < 0.35);
}

TEST_CASE("threshold gap never overshoots the estimated proportion") {
  // The gap bound tops out near (1 - pi) times the achievable
  // separation, so it sits below the point estimate whenever the pool
  // is at least half positive.
  MpeOptions opts;
  opts.bootstrap_b = 200;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    double pi_true = 0.5 + 0.4 * static_cast<double>(rep) / 19.0;
    Rng rng(3000 + rep);
    auto proxy = gauss_draws(2000, 2.5, 1.0, rng);
    auto n_pos = static_cast<std::size_t>(std::llround(pi_true * 3000.0));
    auto unl = mixture_draws(n_pos, 3000 - n_pos, 2.5, 0.0, rng);
    auto est = mpe_estimate(proxy, unl, opts, RngSeed{700 + rep});
    CHECK(est.np_lower_bound <= est.pi_hat + 0.05);
    CHECK(est.np_lower_bound >= 0.0);
    CHECK(est.np_lower_bound <= 1.0);
  }
}

TEST_CASE("score model separates proxy from pool") {
  Rng rng(5);
  auto proxy = blob(1500, 2.0, 0.0, rng);
  auto pool = blob(6000, 2.0, 0.0, rng);
  auto negs = blob(6000, -2.0, 0.0, rng);
  pool.insert(pool.end(), negs.begin(), negs.end());
  std::vector<int> truth(6000, 1);
  truth.insert(truth.end(), 6000, -1);

  auto fit = fit_score_model(proxy, pool, RngSeed{9});
  CHECK(fit.unlabeled_scores.size() == 5000);
  CHECK(fit.proxy_scores.size() > 0);
  CHECK(fit.proxy_scores.size() < proxy.size());

  std::vector<double> pool_scores;
  fit.scorer.score_batch(pool, pool_scores);
  CHECK(eval::auroc(pool_scores, truth) >= 0.95);
}

TEST_CASE("score model cross-validates small pools in place") {
  Rng rng(6);
  auto proxy = blob(300, 2.0, 0.0, rng);
  auto pool = blob(600, 2.0, 0.0, rng);
  auto negs = blob(600, -2.0, 0.0, rng);
  pool.insert(pool.end(), negs.begin(), negs.end());
  std::vector<int> truth(600, 1);
  truth.insert(truth.end(), 600, -1);

  auto fit = fit_score_model(proxy, pool, RngSeed{92});
  REQUIRE(fit.proxy_scores.size() == proxy.size());
  REQUIRE(fit.unlabeled_scores.size() == pool.size());
  CHECK(eval::auroc(fit.unlabeled_scores, truth) >= 0.95);
}

TEST_CASE("score model finds no signal between matching pools") {
  Rng rng(1234);
  auto proxy = blob(1500, 0.0, 0.0, rng);
  auto pool = blob(12000, 0.0, 0.0, rng);
  auto fit = fit_score_model(proxy, pool, RngSeed{77});

  std::vector<double> scores = fit.proxy_scores;
  scores.insert(scores.end(), fit.unlabeled_scores.begin(), fit.unlabeled_scores.end());
  std::vector<int> labels(fit.proxy_scores.size(), 1);
  labels.insert(labels.end(), fit.unlabeled_scores.size(), -1);
  double auc = eval::auroc(scores, labels);
  CHECK(auc > 0.45);
  CHECK(auc < 0.55);

  CHECK_THROWS_AS(fit_score_model({}, pool, RngSeed{1}), std::invalid_argument);
  CHECK_THROWS_AS(fit_score_model(proxy, {}, RngSeed{1}), std::invalid_argument);
}

TEST_CASE("delta sweep replays per-seed training exactly") {
  auto task = make_sweep_task(120, 3, 1, RngSeed{300}, 800);
  auto cfg = linear_sweep_config();
  cfg.deltas = {0.0};
  RngSeed seed{310};

  auto sweep = delta_sweep(task.built.dataset, task.pool, task.audit.samples, 0.5, cfg, seed);
  CHECK(sweep.pi_center == 0.5);
  CHECK(sweep.metric_name == "ap");
  REQUIRE(sweep.points.size() == 1);
  const auto& point = sweep.points[0];
  CHECK(point.pi == 0.5);
  CHECK(point.delta == 0.0);
  CHECK_FALSE(point.ill_conditioned);
  REQUIRE(point.seed_values.size() == cfg.seeds);

  // Rebuild each seeded run from the published seed schedule; the
  // recorded metric values must match bit for bit.
  auto labels = audit_labels(task.audit);
  RngSeed point_seed{seed.value ^ derive_seed(std::uint64_t{0}, 0)};
  risk::MixConfig mix;
  mix.pi = 0.5;
  mix.alpha = task.built.dataset.effective_alpha();
  mix.min_gap_epsilon = cfg.min_gap_epsilon;
  std::vector<double> scores(task.audit.samples.size());
  for (std::size_t s = 0; s < cfg.seeds; ++s) {
    auto tcfg = cfg.train;
    tcfg.seed = derive_seed(point_seed, s);
    auto fit = model::train_ntmp(task.built.dataset, task.pool, mix, cfg.loss, tcfg);
    fit.scorer.score_batch(task.audit.samples, scores);
    CHECK(eval::average_precision(scores, labels) == point.seed_values[s]);
  }
}

TEST_CASE("delta sweep flags priors that collide with the tuple rate") {
  // Pairs with one positive put the tuple rate at one half, so the
  // centered grid point is unidentifiable while an offset one is fine.
  auto task = make_sweep_task(40, 2, 1, RngSeed{320}, 200);
  auto cfg = linear_sweep_config();
  cfg.seeds = 2;
  cfg.deltas = {0.0, 0.2};

  auto sweep = delta_sweep(task.built.dataset, task.pool, task.audit.samples, 0.5, cfg, RngSeed{321});
  REQUIRE(sweep.points.size() == 2);
  const auto& bad = sweep.points[0];
  CHECK(bad.ill_conditioned);
  CHECK(bad.seed_values.empty());
  CHECK(std::isnan(bad.mean));
  CHECK(std::isnan(bad.stddev));
  CHECK(std::isnan(bad.ci_low));
  CHECK(std::isnan(bad.ci_high));
  const auto& good = sweep.points[1];
  CHECK_FALSE(good.ill_conditioned);
  CHECK(std::isfinite(good.mean));

  // The aggregate file keeps the flag and the gap in the stats.
  std::ostringstream out;
  eval::write_sweep_aggregate_csv(out, sweep);
  std::istringstream in(out.str());
  auto parsed = eval::read_sweep_aggregate_csv(in);
  CHECK(parsed.pi_center == sweep.pi_center);
  CHECK(parsed.metric_name == sweep.metric_name);
  REQUIRE(parsed.points.size() == 2);
  CHECK(parsed.points[0].ill_conditioned);
  CHECK(std::isnan(parsed.points[0].mean));
  CHECK(std::isnan(parsed.points[0].ci_high));
  CHECK_FALSE(parsed.points[1].ill_conditioned);
  CHECK(parsed.points[1].mean == good.mean);
  CHECK(parsed.points[1].stddev == good.stddev);
  CHECK(parsed.points[1].ci_low == good.ci_low);
  CHECK(parsed.points[1].ci_high == good.ci_high);
}

TEST_CASE("delta sweep skips out of range priors") {
  auto task = make_sweep_task(40, 3, 1, RngSeed{330}, 200);
  auto cfg = linear_sweep_config();
  cfg.seeds = 1;
  cfg.deltas = {-0.10, -0.05, 0.0, 0.10};

  auto sweep = delta_sweep(task.built.dataset, task.pool, task.audit.samples, 0.05, cfg, RngSeed{331});
  REQUIRE(sweep.points.size() == 2);
  CHECK(sweep.points[0].pi == doctest::Approx(0.05));
  CHECK(sweep.points[0].delta == doctest::Approx(0.0));
  CHECK(sweep.points[1].pi == doctest::Approx(0.15));
  CHECK(sweep.points[1].delta == doctest::Approx(0.10));

  cfg.deltas = {0.6, -0.6};
  CHECK_THROWS_AS(
      delta_sweep(task.built.dataset, task.pool, task.audit.samples, 0.5, cfg, RngSeed{332}),
      std::invalid_argument);

  cfg.deltas = {0.0};
  CHECK_THROWS_AS(delta_sweep(task.built.dataset, task.pool, {}, 0.5, cfg, RngSeed{333}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      delta_sweep(task.built.dataset, task.pool, task.pool.samples, 0.5, cfg, RngSeed{334}),
      std::invalid_argument);
  cfg.seeds = 0;
  CHECK_THROWS_AS(
      delta_sweep(task.built.dataset, task.pool, task.audit.samples, 0.5, cfg, RngSeed{335}),
      std::invalid_argument);

  auto grid = default_delta_grid();
  REQUIRE(grid.size() == 31);
  CHECK(grid.front() == doctest::Approx(-0.30));
  CHECK(grid.back() == doctest::Approx(0.30));
  CHECK(grid[15] == doctest::Approx(0.0));
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(grid[i] - grid[i - 1] == doctest::Approx(0.02));
  }

  CHECK(sweep_metric_name(SweepMetric::AveragePrecision) == "ap");
  CHECK(sweep_metric_name(SweepMetric::MacroF1) == "macro_f1");
}

TEST_CASE("misspecified priors hurt most near the tuple rate") {
  // Thresholded predictions expose the damage; ranking metrics shrug
  // off the mostly-monotone score distortion.
  auto gen_pool = datagen::gen_gaussian_pool(default_task(), 2000, RngSeed{100});
  datagen::TupleBuildSpec tspec;
  tspec.n = 3;
  tspec.m = 1;
  tspec.n_tuples = 250;
  auto built = datagen::build_tuples(gen_pool, tspec, RngSeed{101});
  auto pool = strip_labels(datagen::gen_gaussian_pool(default_task(), 750, RngSeed{102}));
  auto audit = datagen::gen_gaussian_pool(default_task(), 1000, RngSeed{103});

  auto cfg = linear_sweep_config();
  cfg.train.epochs = 40;
  cfg.train.batch_tuples = 64;
  cfg.bootstrap_b = 2000;
  cfg.deltas = {-0.16, -0.08, 0.0, 0.08, 0.16};
  cfg.metric = SweepMetric::MacroF1;

  auto sweep = delta_sweep(built.dataset, pool, audit.samples, 0.5, cfg, RngSeed{104});
  CHECK(sweep.metric_name == "macro_f1");
  REQUIRE(sweep.points.size() == 5);

  // pi = 0.34 sits closest to the tuple rate of one third; the blown-up
  // correction coefficients should make it the clear worst point.
  std::size_t worst = 0;
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    CHECK_FALSE(sweep.points[i].ill_conditioned);
    if (sweep.points[i].mean < sweep.points[worst].mean) worst = i;
  }
  CHECK(worst == 0);
  for (std::size_t i = 1; i < sweep.points.size(); ++i) {
    CHECK(sweep.points[0].mean + 0.05 < sweep.points[i].mean);
  }
  CHECK(sweep.points[2].mean > sweep.points[0].mean + 0.1);
}
