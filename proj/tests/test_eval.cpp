#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "ntmp/core.hpp"
#include "ntmp/eval.hpp"

using namespace ntmp;
using namespace ntmp::eval;

namespace {

SweepPoint make_point(double pi_center, double delta, double mean_v, double width,
                      bool ill = false) {
  SweepPoint p;
  p.pi = pi_center + delta;
  p.delta = delta;
  p.mean = mean_v;
  p.stddev = width / 4.0;
  p.ci_low = mean_v - width / 2.0;
  p.ci_high = mean_v + width / 2.0;
  p.ill_conditioned = ill;
  return p;
}

std::vector<double> random_scores(Rng& rng, std::size_t n) {
  std::vector<double> s(n);
  for (auto& v : s) v = rng.normal();
  return s;
}

std::vector<int> random_labels(Rng& rng, std::size_t n) {
  std::vector<int> y(n);
  for (auto& v : y) v = rng.bernoulli(0.5) ? 1 : -1;
  return y;
}

}  // namespace

TEST_CASE("confusion metrics on a half-right split are all one half") {
  std::vector<int> preds = {1, 1, -1, -1};
  std::vector<int> labels = {1, -1, 1, -1};
  auto cm = confusion_metrics(preds, labels);
  CHECK(cm.accuracy == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cm.tpr == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cm.fpr == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cm.precision == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cm.f1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cm.macro_f1 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("confusion metrics fall back to zero instead of dividing by zero") {
  // No predicted positives: precision and f1 are defined as 0.
  std::vector<int> preds = {-1, -1, -1};
  std::vector<int> labels = {1, 1, -1};
  auto cm = confusion_metrics(preds, labels);
  CHECK(cm.precision == 0.0);
  CHECK(cm.f1 == 0.0);
  CHECK(cm.tpr == 0.0);
  CHECK(cm.fpr == 0.0);

  // No true negatives at all: fpr has an empty denominator.
  std::vector<int> all_pos = {1, 1};
  auto cm2 = confusion_metrics(all_pos, all_pos);
  CHECK(cm2.fpr == 0.0);
  CHECK(cm2.accuracy == 1.0);
}

TEST_CASE("confusion metrics reject malformed input") {
  CHECK_THROWS_AS(confusion_metrics({1}, {1, -1}), std::invalid_argument);
  CHECK_THROWS_AS(confusion_metrics({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(confusion_metrics({0}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(confusion_metrics({1}, {2}), std::invalid_argument);
}

TEST_CASE("average precision puts the lone positive ranked last at one quarter") {
  std::vector<double> scores = {4.0, 3.0, 2.0, 1.0};
  std::vector<int> labels = {-1, -1, -1, 1};
  CHECK(average_precision(scores, labels) == doctest::Approx(0.25).epsilon(1e-12));

  // Ranked first instead: perfect.
  std::vector<int> first = {1, -1, -1, -1};
  CHECK(average_precision(scores, first) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("average precision treats tied scores as one group") {
  // Two tied scores, one positive: the group contributes at its pooled
  // precision rather than rewarding an arbitrary tie order.
  std::vector<double> scores = {1.0, 1.0};
  std::vector<int> labels = {1, -1};
  CHECK(average_precision(scores, labels) == doctest::Approx(0.5).epsilon(1e-12));
  std::vector<int> swapped = {-1, 1};
  CHECK(average_precision(scores, swapped) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("average precision requires at least one positive") {
  CHECK_THROWS_AS(average_precision({1.0, 2.0}, {-1, -1}), std::invalid_argument);
}

TEST_CASE("auroc counts correctly ordered pairs") {
  std::vector<double> scores = {0.9, 0.8, 0.3, 0.1};
  std::vector<int> labels = {1, -1, 1, -1};
  CHECK(auroc(scores, labels) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("auroc gives tied pairs half credit") {
  std::vector<double> scores = {0.5, 0.5, 0.5, 0.5};
  std::vector<int> labels = {1, 1, -1, -1};
  CHECK(auroc(scores, labels) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("auroc requires both classes") {
  CHECK_THROWS_AS(auroc({1.0, 2.0}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(auroc({1.0, 2.0}, {-1, -1}), std::invalid_argument);
}

TEST_CASE("ranking metrics are invariant to monotone score transforms") {
  Rng rng(RngSeed{101});
  for (int trial = 0; trial < 20; ++trial) {
    auto scores = random_scores(rng, 60);
    // Inject ties to exercise the grouped paths.
    for (std::size_t i = 0; i < 10; ++i) scores[i] = scores[i + 10];
    auto labels = random_labels(rng, 60);
    if (std::count(labels.begin(), labels.end(), 1) == 0 ||
        std::count(labels.begin(), labels.end(), -1) == 0) {
      continue;
    }

    std::vector<double> exp_scores, affine_scores;
    for (double s : scores) {
      exp_scores.push_back(std::exp(s));
      affine_scores.push_back(2.0 * s + 3.0);
    }
    CHECK(average_precision(exp_scores, labels) ==
          doctest::Approx(average_precision(scores, labels)).epsilon(1e-12));
    CHECK(average_precision(affine_scores, labels) ==
          doctest::Approx(average_precision(scores, labels)).epsilon(1e-12));
    CHECK(auroc(exp_scores, labels) == doctest::Approx(auroc(scores, labels)).epsilon(1e-12));
    CHECK(auroc(affine_scores, labels) ==
          doctest::Approx(auroc(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("ece is one half when confident predictions are right half the time") {
  std::vector<double> probs(10, 1.0);
  std::vector<int> labels(10, 1);
  for (std::size_t i = 0; i < 5; ++i) labels[i] = -1;
  CHECK(ece(probs, labels) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ece on a single sample is the gap to its label") {
  CHECK(ece({0.7}, {1}) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(ece({0.7}, {-1}) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("ece sends zero probabilities to the lowest bin") {
  // p = 0 with a negative label is perfectly calibrated in its bin.
  CHECK(ece({0.0}, {-1}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ece({0.0}, {1}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ece bins are right closed") {
  // With 15 bins, 0.05 lands in the first bin and 0.10 in the second,
  // so the two samples never share a bin.
  std::vector<double> probs = {0.05, 0.10};
  std::vector<int> labels = {1, -1};
  double expected = 0.5 * std::abs(1.0 - 0.05) + 0.5 * std::abs(0.0 - 0.10);
  CHECK(ece(probs, labels) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ece is small for calibrated probabilities") {
  Rng rng(RngSeed{202});
  std::size_t n = 100000;
  std::vector<double> probs(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = rng.uniform01();
    labels[i] = rng.bernoulli(probs[i]) ? 1 : -1;
  }
  CHECK(ece(probs, labels) <= 0.01);
}

TEST_CASE("ece rejects probabilities outside the unit interval") {
  CHECK_THROWS_AS(ece({1.2}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(ece({-0.1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(ece({0.5}, {1}, 0), std::invalid_argument);
}

TEST_CASE("brier score matches the hand computation") {
  std::vector<double> probs = {0.8, 0.3};
  std::vector<int> labels = {1, -1};
  CHECK(brier(probs, labels) == doctest::Approx(0.065).epsilon(1e-12));
}

TEST_CASE("score to probability is the logistic link") {
  CHECK(score_to_probability(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(score_to_probability(1000.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(score_to_probability(-1000.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(score_to_probability(2.0, 2.0) ==
        doctest::Approx(score_to_probability(1.0)).epsilon(1e-15));
  // Complementary symmetry.
  CHECK(score_to_probability(1.7) + score_to_probability(-1.7) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("temperature scaling recovers one on calibrated logits") {
  Rng rng(RngSeed{303});
  std::size_t n = 20000;
  std::vector<double> logits(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = rng.normal(0.0, 2.0);
    labels[i] = rng.bernoulli(score_to_probability(logits[i])) ? 1 : -1;
  }
  auto fit = temperature_scale(logits, labels);
  CHECK_FALSE(fit.degenerate);
  CHECK(fit.temperature == doctest::Approx(1.0).epsilon(0.05));

  // Doubling every logit doubles the temperature that undoes it.
  std::vector<double> doubled(n);
  for (std::size_t i = 0; i < n; ++i) doubled[i] = 2.0 * logits[i];
  auto fit2 = temperature_scale(doubled, labels);
  CHECK(fit2.temperature == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("temperature scaling degrades gracefully on one-class validation data") {
  auto fit = temperature_scale({1.0, 2.0, 3.0}, {1, 1, 1});
  CHECK(fit.degenerate);
  CHECK(fit.temperature == 1.0);
}

TEST_CASE("wilcoxon is degenerate when differences vanish") {
  std::vector<double> a = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  auto res = wilcoxon_signed_rank(a, a);
  CHECK(res.degenerate);
  CHECK(res.p_value == 1.0);
  CHECK(res.n_nonzero == 0);

  // Four nonzero pairs is still too few.
  std::vector<double> b = a;
  for (std::size_t i = 0; i < 4; ++i) b[i] += 1.0;
  auto res2 = wilcoxon_signed_rank(a, b);
  CHECK(res2.degenerate);
  CHECK(res2.n_nonzero == 4);
}

TEST_CASE("wilcoxon exact tail for ten one-sided pairs") {
  std::vector<double> a(10), b(10, 0.0);
  for (std::size_t i = 0; i < 10; ++i) a[i] = static_cast<double>(i + 1);
  auto res = wilcoxon_signed_rank(a, b);
  CHECK_FALSE(res.degenerate);
  CHECK(res.n_nonzero == 10);
  // 2 / 2^10 exactly.
  CHECK(res.p_value == doctest::Approx(0.001953125).epsilon(1e-9));
}

TEST_CASE("wilcoxon sees no signal in alternating differences") {
  std::vector<double> a(10, 0.0), b(10, 0.0);
  for (std::size_t i = 0; i < 10; ++i) {
    double mag = static_cast<double>(i / 2 + 1);
    a[i] = (i % 2 == 0) ? mag : -mag;
  }
  auto res = wilcoxon_signed_rank(a, b);
  CHECK(res.p_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("wilcoxon normal approximation tracks the exact tail at the crossover") {
  Rng rng(RngSeed{404});
  double worst = 0.0;
  for (double shift : {0.0, 0.3, 0.6}) {
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(25), b(25, 0.0);
      for (auto& v : a) v = rng.normal() + shift;
      auto exact = wilcoxon_signed_rank(a, b, 25);
      auto approx = wilcoxon_signed_rank(a, b, 0);
      worst = std::max(worst, std::abs(exact.p_value - approx.p_value));
    }
  }
  CHECK(worst <= 0.01);
}

TEST_CASE("wilcoxon handles tied magnitudes in both regimes") {
  // Six pairs, two tied magnitude groups; just require a valid p-value
  // and agreement between exact and approximate within the usual bound
  // even at this tiny n.
  std::vector<double> a = {1.0, 1.0, 2.0, 2.0, 3.0, 3.0};
  std::vector<double> b = {0.0, 2.0, 0.0, 0.0, 0.0, 0.0};
  auto exact = wilcoxon_signed_rank(a, b, 25);
  auto approx = wilcoxon_signed_rank(a, b, 0);
  CHECK(exact.p_value > 0.0);
  CHECK(exact.p_value <= 1.0);
  CHECK(approx.p_value > 0.0);
  CHECK(approx.p_value <= 1.0);
}

TEST_CASE("holm adjustment matches the worked examples") {
  auto adj = holm_adjust({0.01, 0.02, 0.04});
  CHECK(adj[0] == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(adj[1] == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(adj[2] == doctest::Approx(0.04).epsilon(1e-12));

  auto capped = holm_adjust({0.5, 0.6});
  CHECK(capped[0] == 1.0);
  CHECK(capped[1] == 1.0);
}

TEST_CASE("holm adjustment never shrinks and preserves order") {
  Rng rng(RngSeed{505});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> ps(8);
    for (auto& p : ps) p = rng.uniform01();
    auto adj = holm_adjust(ps);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      CHECK(adj[i] >= ps[i]);
      CHECK(adj[i] <= 1.0);
      for (std::size_t j = 0; j < ps.size(); ++j) {
        if (ps[i] < ps[j]) CHECK(adj[i] <= adj[j]);
      }
    }
  }
}

TEST_CASE("holm adjustment rejects p-values outside the unit interval") {
  CHECK_THROWS_AS(holm_adjust({1.5}), std::invalid_argument);
  CHECK(holm_adjust({}).empty());
}

TEST_CASE("cliffs delta balances wins and losses") {
  CHECK(cliffs_delta({1.0, 2.0}, {1.5}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cliffs_delta({2.0, 3.0}, {1.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cliffs_delta({0.0}, {1.0, 2.0}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(cliffs_delta({}, {1.0}), std::invalid_argument);
}

TEST_CASE("cliffs delta is antisymmetric") {
  Rng rng(RngSeed{606});
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_scores(rng, 13);
    auto y = random_scores(rng, 7);
    CHECK(cliffs_delta(x, y) == doctest::Approx(-cliffs_delta(y, x)).epsilon(1e-15));
  }
}

TEST_CASE("cliffs magnitude thresholds") {
  CHECK(cliffs_magnitude(0.0) == CliffsMagnitude::Negligible);
  CHECK(cliffs_magnitude(0.146) == CliffsMagnitude::Negligible);
  CHECK(cliffs_magnitude(0.147) == CliffsMagnitude::Small);
  CHECK(cliffs_magnitude(-0.2) == CliffsMagnitude::Small);
  CHECK(cliffs_magnitude(0.33) == CliffsMagnitude::Medium);
  CHECK(cliffs_magnitude(0.474) == CliffsMagnitude::Large);
  CHECK(cliffs_magnitude(-1.0) == CliffsMagnitude::Large);
  CHECK(cliffs_magnitude_name(CliffsMagnitude::Medium) == "medium");
}

TEST_CASE("bootstrap interval brackets a coin-flip mean") {
  std::vector<double> values(100, 0.0);
  for (std::size_t i = 50; i < 100; ++i) values[i] = 1.0;
  auto ci = bootstrap_ci(values, 10000, 0.95, RngSeed{707});
  CHECK(ci.low == doctest::Approx(0.40).epsilon(0.08));
  CHECK(ci.high == doctest::Approx(0.60).epsilon(0.08));
  CHECK(ci.low < ci.high);

  // Same seed, same interval.
  auto ci2 = bootstrap_ci(values, 10000, 0.95, RngSeed{707});
  CHECK(ci.low == ci2.low);
  CHECK(ci.high == ci2.high);
}

TEST_CASE("bootstrap interval covers the true mean at roughly its nominal rate") {
  Rng rng(RngSeed{808});
  int covered = 0;
  int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> values(30);
    for (auto& v : values) v = rng.normal();
    auto ci = bootstrap_ci(values, 1000, 0.95, derive_seed(RngSeed{808}, t + 1));
    if (ci.low <= 0.0 && 0.0 <= ci.high) ++covered;
  }
  double rate = static_cast<double>(covered) / trials;
  CHECK(rate >= 0.91);
  CHECK(rate <= 0.99);
}

TEST_CASE("bootstrap rejects unusable input") {
  CHECK_THROWS_AS(bootstrap_ci({1.0}, 100, 0.95, RngSeed{1}), std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_ci({1.0, 2.0}, 0, 0.95, RngSeed{1}), std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_ci({1.0, 2.0}, 100, 1.0, RngSeed{1}), std::invalid_argument);
}

TEST_CASE("spearman correlation responds to monotone association") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> y_up = {10.0, 20.0, 25.0, 70.0, 100.0};
  std::vector<double> y_down = {5.0, 4.0, 3.0, 2.0, 1.0};
  CHECK(spearman(x, y_up) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(x, y_down) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(spearman(x, {1.0, 1.0, 1.0, 1.0, 1.0}) == 0.0);
}

TEST_CASE("metric report assembles scores into one record") {
  Rng rng(RngSeed{909});
  std::size_t n = 2000;
  std::vector<double> test_scores(n), val_scores(n);
  std::vector<int> test_labels(n), val_labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    int y = rng.bernoulli(0.5) ? 1 : -1;
    test_labels[i] = y;
    test_scores[i] = rng.normal(static_cast<double>(y), 1.0);
    y = rng.bernoulli(0.5) ? 1 : -1;
    val_labels[i] = y;
    val_scores[i] = rng.normal(static_cast<double>(y), 1.0);
  }
  auto report = metric_report(test_scores, test_labels, val_scores, val_labels);
  CHECK(report.accuracy > 0.75);
  CHECK(report.auroc > 0.85);
  CHECK(report.ap > 0.85);
  CHECK(report.temperature > 0.0);
  CHECK(report.ece >= 0.0);
  CHECK(report.brier >= 0.0);
  CHECK(report.brier <= 0.25);

  // A scorer drawn this way is roughly calibrated under the logistic
  // link at scale 2, so the fitted temperature moves toward 0.5 and
  // scaling should not make calibration worse by much.
  CHECK(report.ece_ts <= report.ece + 0.02);

  auto json = metric_report_to_json(report);
  CHECK(json.find("\"auroc\"") != std::string::npos);
  CHECK(json.find("\"temperature\"") != std::string::npos);

  auto header = metric_report_csv_header();
  auto row = metric_report_csv_row(report);
  CHECK(std::count(header.begin(), header.end(), ',') ==
        std::count(row.begin(), row.end(), ','));
}

TEST_CASE("robustness window matches the hand-worked sweep") {
  SweepResult sweep;
  sweep.pi_center = 0.5;
  sweep.metric_name = "accuracy";
  sweep.points.push_back(make_point(0.5, 0.0, 0.90, 0.03));
  sweep.points.push_back(make_point(0.5, 0.05, 0.89, 0.03));
  sweep.points.push_back(make_point(0.5, 0.10, 0.86, 0.06));

  auto window = robustness_window(sweep, 0.02, 0.05);
  CHECK(window.delta_min == 0.0);
  CHECK(window.delta_max == doctest::Approx(0.05).epsilon(1e-12));
  REQUIRE(window.delta_crit.has_value());
  CHECK(*window.delta_crit == doctest::Approx(0.10).epsilon(1e-12));
}

TEST_CASE("robustness window degenerates when the center itself is wide") {
  SweepResult sweep;
  sweep.pi_center = 0.5;
  sweep.points.push_back(make_point(0.5, 0.0, 0.90, 0.08));
  sweep.points.push_back(make_point(0.5, 0.05, 0.90, 0.03));

  auto window = robustness_window(sweep, 0.02, 0.05);
  CHECK(window.delta_min == 0.0);
  CHECK(window.delta_max == 0.0);
  REQUIRE(window.delta_crit.has_value());
  CHECK(*window.delta_crit == 0.0);
}

TEST_CASE("robustness window needs both signed neighbours to hold") {
  SweepResult sweep;
  sweep.pi_center = 0.5;
  sweep.points.push_back(make_point(0.5, 0.0, 0.90, 0.03));
  sweep.points.push_back(make_point(0.5, 0.05, 0.895, 0.03));
  // The negative side at the same gap drifts too far.
  sweep.points.push_back(make_point(0.5, -0.05, 0.80, 0.03));

  auto window = robustness_window(sweep, 0.02, 0.05);
  CHECK(window.delta_max == 0.0);
  CHECK_FALSE(window.delta_crit.has_value());
}

TEST_CASE("robustness window treats ill-conditioned points as infinitely wide") {
  SweepResult sweep;
  sweep.pi_center = 0.5;
  sweep.points.push_back(make_point(0.5, 0.0, 0.90, 0.03));
  sweep.points.push_back(make_point(0.5, 0.05, 0.90, 0.03, /*ill=*/true));
  sweep.points.push_back(make_point(0.5, 0.10, 0.90, 0.03));

  auto window = robustness_window(sweep, 0.02, 0.05);
  CHECK(window.delta_max == 0.0);
  REQUIRE(window.delta_crit.has_value());
  CHECK(*window.delta_crit == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("robustness window keeps extending while every gap stays tight") {
  SweepResult sweep;
  sweep.pi_center = 0.5;
  for (double d : {0.0, 0.05, 0.10, 0.15}) {
    sweep.points.push_back(make_point(0.5, d, 0.90, 0.02));
    if (d > 0.0) sweep.points.push_back(make_point(0.5, -d, 0.89, 0.02));
  }
  auto window = robustness_window(sweep, 0.02, 0.05);
  CHECK(window.delta_max == doctest::Approx(0.15).epsilon(1e-12));
  CHECK_FALSE(window.delta_crit.has_value());
}

TEST_CASE("robustness window requires a center point") {
  SweepResult sweep;
  sweep.pi_center = 0.5;
  sweep.points.push_back(make_point(0.5, 0.05, 0.9, 0.03));
  CHECK_THROWS_AS(robustness_window(sweep), std::invalid_argument);
}

TEST_CASE("sweep csv writers round trip through the aggregate format") {
  SweepResult sweep;
  sweep.pi_center = 0.5;
  sweep.metric_name = "auroc";
  for (double d : {-0.1, -0.05, 0.0, 0.05, 0.1}) {
    auto p = make_point(0.5, d, 0.9 - std::abs(d), 0.03 + std::abs(d) / 2.0);
    p.seed_values = {p.mean - 0.01, p.mean, p.mean + 0.01};
    sweep.points.push_back(p);
  }
  sweep.points[4].ill_conditioned = true;

  auto window = robustness_window(sweep, 0.02, 0.05);

  std::ostringstream agg;
  write_sweep_aggregate_csv(agg, sweep, &window);
  std::istringstream in(agg.str());
  auto parsed = read_sweep_aggregate_csv(in);

  CHECK(parsed.pi_center == sweep.pi_center);
  CHECK(parsed.metric_name == sweep.metric_name);
  REQUIRE(parsed.points.size() == sweep.points.size());
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    CHECK(parsed.points[i].pi == sweep.points[i].pi);
    CHECK(parsed.points[i].mean == sweep.points[i].mean);
    CHECK(parsed.points[i].stddev == sweep.points[i].stddev);
    CHECK(parsed.points[i].ci_low == sweep.points[i].ci_low);
    CHECK(parsed.points[i].ci_high == sweep.points[i].ci_high);
    CHECK(parsed.points[i].ill_conditioned == sweep.points[i].ill_conditioned);
    CHECK(parsed.points[i].delta == doctest::Approx(sweep.points[i].delta).epsilon(1e-12));
  }

  // Reconstructed deltas may sit one ulp off the originals, so the
  // window agrees to tolerance rather than bitwise.
  auto window2 = robustness_window(parsed, 0.02, 0.05);
  CHECK(window2.delta_max == doctest::Approx(window.delta_max).epsilon(1e-9));
  CHECK(window2.delta_crit.has_value() == window.delta_crit.has_value());

  // Once a sweep has been through one parse, further cycles are exact:
  // parse(write(parsed)) serializes byte-for-byte identically, which is
  // what pins golden files.
  std::ostringstream agg2;
  write_sweep_aggregate_csv(agg2, parsed, &window2);
  std::istringstream in2(agg2.str());
  auto parsed2 = read_sweep_aggregate_csv(in2);
  auto window3 = robustness_window(parsed2, 0.02, 0.05);
  std::ostringstream agg3;
  write_sweep_aggregate_csv(agg3, parsed2, &window3);
  CHECK(agg2.str() == agg3.str());
}

TEST_CASE("per-seed sweep csv lists one row per seed value") {
  SweepResult sweep;
  sweep.pi_center = 0.4;
  sweep.metric_name = "f1";
  auto p = make_point(0.4, 0.0, 0.8, 0.02);
  p.seed_values = {0.79, 0.80, 0.81};
  sweep.points.push_back(p);

  std::ostringstream os;
  write_sweep_csv(os, sweep);
  std::string text = os.str();
  CHECK(text.find("pi,delta,seed,metric,metric_name") == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  CHECK(text.find(",f1\n") != std::string::npos);
}
