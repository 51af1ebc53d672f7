#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntmp/core.hpp"
#include "ntmp/eval.hpp"
#include "ntmp/train.hpp"

namespace ntmp::prior {

// Thrown when a score sample is constant, so kernel smoothing has no
// scale to work with.
class DegenerateBandwidthError : public std::runtime_error {
 public:
  explicit DegenerateBandwidthError(const std::string& msg) : std::runtime_error(msg) {}
};

// Exact binomial 95% confidence band. Endpoint conventions: zero
// successes pin the lower edge to 0, all successes pin the upper edge
// to 1.
struct BinomialBand {
  double low = 0.0;
  double high = 1.0;
};

BinomialBand clopper_pearson(std::size_t successes, std::size_t trials);

// The largest threshold gap between the proxy and pool score
// distributions: max over thresholds of (TPR - FPR), clipped at zero.
// The band combines the two per-rate binomial bands at the argmax
// threshold conservatively (widest consistent difference).
struct NpBound {
  double value = 0.0;
  double threshold = 0.0;
  BinomialBand band;
};

NpBound np_lower_bound(const std::vector<double>& proxy_scores,
                       const std::vector<double>& unlabeled_scores,
                       std::size_t n_thresholds = 200);

// h = 0.9 * min(sd, IQR/1.34) * n^(-1/5); when the IQR collapses to
// zero on a non-constant sample the sd alone sets the scale. Constant
// samples throw DegenerateBandwidthError.
double silverman_bandwidth(const std::vector<double>& values);

// Pool-adjacent-violators fit, nondecreasing, uniform weights. Output
// is exactly monotone.
std::vector<double> isotonic_nondecreasing(const std::vector<double>& values);

struct PriorEstimate {
  double pi_hat = 1.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double np_lower_bound = 0.0;
  double lb_ci_low = 0.0;
  double lb_ci_high = 1.0;
};

struct MpeOptions {
  // Threshold grid: quantiles of the proxy score distribution.
  double grid_lo = 0.6;
  double grid_hi = 0.99;
  std::size_t grid_points = 200;
  std::size_t bootstrap_b = 1000;
  // Scores are binned once and resamples redraw bin counts, so the
  // bootstrap cost does not scale with the raw sample size.
  std::size_t histogram_bins = 512;
};

// Point estimate of the positive fraction in the pool from the ratio
// of kernel-smoothed upper-tail masses, made monotone before taking
// the deep-tail value, with a percentile bootstrap interval. Also
// carries the threshold-gap lower bound on the same scores.
PriorEstimate mpe_estimate(const std::vector<double>& proxy_scores,
                           const std::vector<double>& unlabeled_scores,
                           const MpeOptions& options, RngSeed seed);
PriorEstimate mpe_estimate(const std::vector<double>& proxy_scores,
                           const std::vector<double>& unlabeled_scores, RngSeed seed);

struct ScoreModelResult {
  std::vector<double> proxy_scores;
  std::vector<double> unlabeled_scores;
  model::Scorer scorer;
};

// Trains a width-256 one-hidden-layer scorer to separate the proxy
// (+1) from the pool (-1) with logistic loss and light weight decay,
// and returns held-out scores for both sides. The held-out slice is
// max(5000, 10% of the pool); pools too small to spare that much are
// scored by 10-fold cross-validation instead, in which case every
// sample gets an out-of-fold score.
ScoreModelResult fit_score_model(const std::vector<InstanceSample>& proxy_pool,
                                 const std::vector<InstanceSample>& unlabeled_pool,
                                 RngSeed seed);

enum class SweepMetric { AveragePrecision, MacroF1 };

std::string sweep_metric_name(SweepMetric metric);

struct SweepConfig {
  model::TrainConfig train;
  LossSpec loss = LossSpec::logistic();
  // Empty means the default grid from default_delta_grid().
  std::vector<double> deltas;
  std::size_t seeds = 5;
  std::size_t bootstrap_b = 10000;
  SweepMetric metric = SweepMetric::AveragePrecision;
  double min_gap_epsilon = 0.05;
};

// {-0.30, -0.28, ..., +0.30}
std::vector<double> default_delta_grid();

// Retrains at every prior pi_center + delta inside (0,1) and scores
// the audit set. Each grid point draws its seeds independently
// (seed xor hash(index)), so points can run in any order or in
// parallel; a point whose prior collides with a tuple rate is marked
// ill-conditioned instead of failing the sweep.
eval::SweepResult delta_sweep(const TupleDataset& tuples, const UnlabeledPool& pool,
                              const std::vector<InstanceSample>& audit_test, double pi_center,
                              const SweepConfig& config, RngSeed seed);

}  // namespace ntmp::prior
