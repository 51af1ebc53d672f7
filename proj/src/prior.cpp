#include "ntmp/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

namespace ntmp::prior {

namespace {

double interpolated_quantile(const std::vector<double>& sorted, double q) {
  double pos = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// P(N(0,1) > z)
double normal_upper(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::size_t count_above(const std::vector<double>& sorted, double threshold) {
  return sorted.size() -
         static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), threshold) -
                                  sorted.begin());
}

struct BinnedScores {
  std::vector<double> counts;
  std::vector<std::size_t> bin_of;  // bin index of each original score
};

BinnedScores bin_scores(const std::vector<double>& scores, double lo, double hi,
                        std::size_t bins) {
  BinnedScores out;
  out.counts.assign(bins, 0.0);
  out.bin_of.reserve(scores.size());
  double width = (hi - lo) / static_cast<double>(bins);
  for (double s : scores) {
    std::size_t b = 0;
    if (width > 0.0 && s > lo) {
      b = std::min(bins - 1, static_cast<std::size_t>((s - lo) / width));
    }
    out.counts[b] += 1.0;
    out.bin_of.push_back(b);
  }
  return out;
}

// Upper-tail mass of the kernel-smoothed sample at every grid point:
// out[g] = (1/n) * sum_b counts[b] * P(N(center_b, h^2) > t_g).
void smoothed_survival(const std::vector<double>& counts, const std::vector<double>& kernel,
                       std::size_t grid_points, double n, std::vector<double>& out) {
  std::size_t bins = counts.size();
  out.assign(grid_points, 0.0);
  for (std::size_t g = 0; g < grid_points; ++g) {
    double acc = 0.0;
    const double* row = &kernel[g * bins];
    for (std::size_t b = 0; b < bins; ++b) acc += counts[b] * row[b];
    out[g] = acc / n;
  }
}

double tail_ratio_estimate(const std::vector<double>& survival_u,
                           const std::vector<double>& survival_p) {
  std::vector<double> ratio(survival_u.size(), 0.0);
  for (std::size_t g = 0; g < ratio.size(); ++g) {
    if (survival_p[g] <= 0.0) {
      throw std::runtime_error("proxy tail mass vanished on the threshold grid");
    }
    ratio[g] = survival_u[g] / survival_p[g];
  }
  // A survival ratio is nonincreasing in the threshold, so the fit
  // runs from the deep tail backwards. Reading the max off the
  // projected curve lands on the shallow end, where both tail masses
  // are large; the raw deep-tail values are inflated whenever the
  // pool's kernel bandwidth exceeds the proxy's.
  std::reverse(ratio.begin(), ratio.end());
  auto monotone = isotonic_nondecreasing(ratio);
  return std::clamp(monotone.back(), 1e-12, 1.0);
}

}  // namespace

BinomialBand clopper_pearson(std::size_t successes, std::size_t trials) {
  if (trials == 0) throw std::invalid_argument("clopper_pearson: no trials");
  if (successes > trials) throw std::invalid_argument("clopper_pearson: successes > trials");
  double k = static_cast<double>(successes);
  double n = static_cast<double>(trials);
  BinomialBand band;
  if (successes > 0) band.low = boost::math::ibeta_inv(k, n - k + 1.0, 0.025);
  if (successes < trials) band.high = boost::math::ibeta_inv(k + 1.0, n - k, 0.975);
  return band;
}

NpBound np_lower_bound(const std::vector<double>& proxy_scores,
                       const std::vector<double>& unlabeled_scores,
                       std::size_t n_thresholds) {
  if (proxy_scores.empty() || unlabeled_scores.empty()) {
    throw std::invalid_argument("np_lower_bound: empty score list");
  }
  if (n_thresholds == 0) throw std::invalid_argument("np_lower_bound: no thresholds");

  std::vector<double> proxy = proxy_scores;
  std::vector<double> unl = unlabeled_scores;
  std::sort(proxy.begin(), proxy.end());
  std::sort(unl.begin(), unl.end());
  double lo = std::min(proxy.front(), unl.front());
  double hi = std::max(proxy.back(), unl.back());

  double best_diff = -std::numeric_limits<double>::infinity();
  double best_threshold = lo;
  std::size_t best_tp = 0, best_fp = 0;
  for (std::size_t j = 0; j < n_thresholds; ++j) {
    double tau = n_thresholds == 1
                     ? 0.5 * (lo + hi)
                     : lo + (hi - lo) * static_cast<double>(j) /
                               static_cast<double>(n_thresholds - 1);
    std::size_t tp = count_above(proxy, tau);
    std::size_t fp = count_above(unl, tau);
    double diff = static_cast<double>(tp) / static_cast<double>(proxy.size()) -
                  static_cast<double>(fp) / static_cast<double>(unl.size());
    if (diff > best_diff) {
      best_diff = diff;
      best_threshold = tau;
      best_tp = tp;
      best_fp = fp;
    }
  }

  NpBound out;
  out.value = std::max(0.0, best_diff);
  out.threshold = best_threshold;
  auto tpr_band = clopper_pearson(best_tp, proxy.size());
  auto fpr_band = clopper_pearson(best_fp, unl.size());
  out.band.high = std::clamp(tpr_band.high - fpr_band.low, 0.0, 1.0);
  out.band.low = std::clamp(tpr_band.low - fpr_band.high, 0.0, out.band.high);
  return out;
}

double silverman_bandwidth(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw DegenerateBandwidthError("need at least two scores to set a bandwidth");
  }
  double sd = sample_stddev(values);
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  double iqr = interpolated_quantile(sorted, 0.75) - interpolated_quantile(sorted, 0.25);
  double scale = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (scale <= 0.0) {
    throw DegenerateBandwidthError("score sample is constant; kernel bandwidth is zero");
  }
  return 0.9 * scale * std::pow(static_cast<double>(values.size()), -0.2);
}

std::vector<double> isotonic_nondecreasing(const std::vector<double>& values) {
  struct Block {
    double sum = 0.0;
    double count = 0.0;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (double v : values) {
    blocks.push_back({v, 1.0});
    while (blocks.size() >= 2) {
      auto& prev = blocks[blocks.size() - 2];
      auto& last = blocks.back();
      if (prev.sum / prev.count <= last.sum / last.count) break;
      prev.sum += last.sum;
      prev.count += last.count;
      blocks.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) {
    double level = b.sum / b.count;
    for (double i = 0.0; i < b.count; i += 1.0) out.push_back(level);
  }
  return out;
}

PriorEstimate mpe_estimate(const std::vector<double>& proxy_scores,
                           const std::vector<double>& unlabeled_scores,
                           const MpeOptions& options, RngSeed seed) {
  if (proxy_scores.empty() || unlabeled_scores.empty()) {
    throw std::invalid_argument("mpe_estimate: empty score list");
  }
  if (options.grid_points < 2 || options.histogram_bins < 2) {
    throw std::invalid_argument("mpe_estimate: grid and histogram need at least 2 points");
  }
  if (!(options.grid_lo < options.grid_hi && options.grid_lo >= 0.0 &&
        options.grid_hi <= 1.0)) {
    throw std::invalid_argument("mpe_estimate: quantile range must be ordered inside [0,1]");
  }

  // One bandwidth for the score variable, set on the pooled sample.
  // Smoothing both sides with the same kernel cancels in the ratio;
  // per-sample bandwidths would smear the (wider) pool distribution
  // more than the proxy and inflate the deep-tail ratio.
  std::vector<double> pooled = proxy_scores;
  pooled.insert(pooled.end(), unlabeled_scores.begin(), unlabeled_scores.end());
  double h = silverman_bandwidth(pooled);

  // Threshold grid: quantiles of the proxy score distribution.
  std::vector<double> proxy_sorted = proxy_scores;
  std::sort(proxy_sorted.begin(), proxy_sorted.end());
  std::size_t grid_n = options.grid_points;
  std::vector<double> grid(grid_n);
  for (std::size_t g = 0; g < grid_n; ++g) {
    double q = options.grid_lo + (options.grid_hi - options.grid_lo) *
                                     static_cast<double>(g) / static_cast<double>(grid_n - 1);
    grid[g] = interpolated_quantile(proxy_sorted, q);
  }

  // Bin both samples once over their common range; the bootstrap then
  // only redraws counts, with the grid and bandwidths frozen from the
  // original sample.
  double lo = std::min(proxy_sorted.front(),
                       *std::min_element(unlabeled_scores.begin(), unlabeled_scores.end()));
  double hi = std::max(proxy_sorted.back(),
                       *std::max_element(unlabeled_scores.begin(), unlabeled_scores.end()));
  std::size_t bins = options.histogram_bins;
  auto binned_p = bin_scores(proxy_scores, lo, hi, bins);
  auto binned_u = bin_scores(unlabeled_scores, lo, hi, bins);

  double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> kernel(grid_n * bins);
  for (std::size_t g = 0; g < grid_n; ++g) {
    for (std::size_t b = 0; b < bins; ++b) {
      double center = lo + (static_cast<double>(b) + 0.5) * width;
      kernel[g * bins + b] = normal_upper((grid[g] - center) / h);
    }
  }

  double n_p = static_cast<double>(proxy_scores.size());
  double n_u = static_cast<double>(unlabeled_scores.size());
  std::vector<double> survival_p, survival_u;
  smoothed_survival(binned_p.counts, kernel, grid_n, n_p, survival_p);
  smoothed_survival(binned_u.counts, kernel, grid_n, n_u, survival_u);

  PriorEstimate est;
  est.pi_hat = tail_ratio_estimate(survival_u, survival_p);

  Rng rng(derive_seed(seed, 0));
  std::vector<double> resampled(options.bootstrap_b, 0.0);
  std::vector<double> counts_p(bins), counts_u(bins);
  for (std::size_t r = 0; r < options.bootstrap_b; ++r) {
    std::fill(counts_p.begin(), counts_p.end(), 0.0);
    std::fill(counts_u.begin(), counts_u.end(), 0.0);
    for (std::size_t k = 0; k < proxy_scores.size(); ++k) {
      counts_p[binned_p.bin_of[rng.index(proxy_scores.size())]] += 1.0;
    }
    for (std::size_t k = 0; k < unlabeled_scores.size(); ++k) {
      counts_u[binned_u.bin_of[rng.index(unlabeled_scores.size())]] += 1.0;
    }
    smoothed_survival(counts_p, kernel, grid_n, n_p, survival_p);
    smoothed_survival(counts_u, kernel, grid_n, n_u, survival_u);
    resampled[r] = tail_ratio_estimate(survival_u, survival_p);
  }
  std::sort(resampled.begin(), resampled.end());
  auto quantile = [&](double q) { return interpolated_quantile(resampled, q); };
  // Percentile interval, widened if needed so the point estimate never
  // falls outside its own interval.
  est.ci_low = std::min(quantile(0.025), est.pi_hat);
  est.ci_high = std::max(quantile(0.975), est.pi_hat);

  auto np = np_lower_bound(proxy_scores, unlabeled_scores);
  est.np_lower_bound = np.value;
  est.lb_ci_low = np.band.low;
  est.lb_ci_high = np.band.high;
  return est;
}

PriorEstimate mpe_estimate(const std::vector<double>& proxy_scores,
                           const std::vector<double>& unlabeled_scores, RngSeed seed) {
  return mpe_estimate(proxy_scores, unlabeled_scores, MpeOptions{}, seed);
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  return idx;
}

model::TrainConfig score_model_config(std::size_t input_dim, RngSeed seed) {
  model::TrainConfig tcfg;
  tcfg.scorer.kind = model::ScorerKind::Mlp1;
  tcfg.scorer.input_dim = input_dim;
  tcfg.scorer.hidden_width = 256;
  tcfg.epochs = 20;
  tcfg.learning_rate = 1e-3;
  tcfg.weight_decay = 1e-4;
  tcfg.seed = seed;
  return tcfg;
}

std::vector<InstanceSample> labeled_union(const std::vector<InstanceSample>& proxy,
                                          const std::vector<InstanceSample>& unlabeled,
                                          const std::vector<std::size_t>& proxy_idx,
                                          const std::vector<std::size_t>& unl_idx) {
  std::vector<InstanceSample> out;
  out.reserve(proxy_idx.size() + unl_idx.size());
  for (std::size_t i : proxy_idx) {
    out.push_back(proxy[i]);
    out.back().label = 1;
  }
  for (std::size_t i : unl_idx) {
    out.push_back(unlabeled[i]);
    out.back().label = -1;
  }
  return out;
}

}  // namespace

ScoreModelResult fit_score_model(const std::vector<InstanceSample>& proxy_pool,
                                 const std::vector<InstanceSample>& unlabeled_pool,
                                 RngSeed seed) {
  if (proxy_pool.empty()) throw std::invalid_argument("fit_score_model: empty proxy pool");
  if (unlabeled_pool.empty()) {
    throw std::invalid_argument("fit_score_model: empty unlabeled pool");
  }
  std::size_t dim = proxy_pool.front().features.size();

  Rng split_rng(derive_seed(seed, 0));
  auto proxy_idx = shuffled_indices(proxy_pool.size(), split_rng);
  auto unl_idx = shuffled_indices(unlabeled_pool.size(), split_rng);

  constexpr std::size_t kMinValidation = 5000;
  std::size_t n_u = unlabeled_pool.size();
  std::size_t val_u = std::max(kMinValidation, n_u / 10);

  if (2 * val_u >= n_u) {
    // Holding out that much would starve training; score everything
    // out-of-fold with 10-fold splits instead (folds are stratified
    // because each pool is dealt round-robin after shuffling).
    constexpr std::size_t kFolds = 10;
    std::vector<double> proxy_scores(proxy_pool.size(), 0.0);
    std::vector<double> unl_scores(unlabeled_pool.size(), 0.0);
    ScoreModelResult last_fit{{}, {}, model::Scorer::make(
                                          score_model_config(dim, seed).scorer, split_rng)};
    for (std::size_t fold = 0; fold < kFolds; ++fold) {
      std::vector<std::size_t> train_p, train_u, hold_p, hold_u;
      for (std::size_t k = 0; k < proxy_idx.size(); ++k) {
        (k % kFolds == fold ? hold_p : train_p).push_back(proxy_idx[k]);
      }
      for (std::size_t k = 0; k < unl_idx.size(); ++k) {
        (k % kFolds == fold ? hold_u : train_u).push_back(unl_idx[k]);
      }
      if (train_p.empty() || train_u.empty()) {
        throw std::invalid_argument("fit_score_model: pools too small for cross-validation");
      }
      auto labeled = labeled_union(proxy_pool, unlabeled_pool, train_p, train_u);
      auto fit = model::train_supervised(labeled, LossSpec::logistic(),
                                         score_model_config(dim, derive_seed(seed, fold + 1)));
      for (std::size_t i : hold_p) proxy_scores[i] = fit.scorer.score(proxy_pool[i].features);
      for (std::size_t i : hold_u) {
        unl_scores[i] = fit.scorer.score(unlabeled_pool[i].features);
      }
      last_fit.scorer = std::move(fit.scorer);
    }
    last_fit.proxy_scores = std::move(proxy_scores);
    last_fit.unlabeled_scores = std::move(unl_scores);
    return last_fit;
  }

  // Plain holdout: the same fraction of each pool is set aside so the
  // validation scores cover both classes.
  double frac = static_cast<double>(val_u) / static_cast<double>(n_u);
  std::size_t val_p =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::llround(frac * static_cast<double>(proxy_pool.size()))));
  val_p = std::min(val_p, proxy_pool.size() - 1);

  std::vector<std::size_t> hold_p(proxy_idx.begin(), proxy_idx.begin() + val_p);
  std::vector<std::size_t> train_p(proxy_idx.begin() + val_p, proxy_idx.end());
  std::vector<std::size_t> hold_u(unl_idx.begin(), unl_idx.begin() + val_u);
  std::vector<std::size_t> train_u(unl_idx.begin() + val_u, unl_idx.end());

  auto labeled = labeled_union(proxy_pool, unlabeled_pool, train_p, train_u);
  auto fit = model::train_supervised(labeled, LossSpec::logistic(),
                                     score_model_config(dim, derive_seed(seed, 1)));

  ScoreModelResult out{{}, {}, std::move(fit.scorer)};
  out.proxy_scores.reserve(hold_p.size());
  for (std::size_t i : hold_p) out.proxy_scores.push_back(out.scorer.score(proxy_pool[i].features));
  out.unlabeled_scores.reserve(hold_u.size());
  for (std::size_t i : hold_u) {
    out.unlabeled_scores.push_back(out.scorer.score(unlabeled_pool[i].features));
  }
  return out;
}

std::string sweep_metric_name(SweepMetric metric) {
  switch (metric) {
    case SweepMetric::AveragePrecision: return "ap";
    case SweepMetric::MacroF1: return "macro_f1";
  }
  throw std::logic_error("unknown sweep metric");
}

std::vector<double> default_delta_grid() {
  std::vector<double> out;
  out.reserve(31);
  for (int i = -15; i <= 15; ++i) out.push_back(0.02 * static_cast<double>(i));
  return out;
}

eval::SweepResult delta_sweep(const TupleDataset& tuples, const UnlabeledPool& pool,
                              const std::vector<InstanceSample>& audit_test, double pi_center,
                              const SweepConfig& config, RngSeed seed) {
  if (audit_test.empty()) throw std::invalid_argument("delta_sweep: empty audit test set");
  if (config.seeds == 0) throw std::invalid_argument("delta_sweep: need at least one seed");
  std::vector<int> audit_labels;
  audit_labels.reserve(audit_test.size());
  for (const auto& s : audit_test) {
    if (!s.label.has_value()) {
      throw std::invalid_argument("delta_sweep: audit samples must carry labels");
    }
    audit_labels.push_back(*s.label);
  }

  const std::vector<double>& deltas =
      config.deltas.empty() ? default_delta_grid() : config.deltas;

  eval::SweepResult out;
  out.pi_center = pi_center;
  out.metric_name = sweep_metric_name(config.metric);

  bool any_in_range = false;
  std::vector<double> scores(audit_test.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    double pi = pi_center + deltas[i];
    if (!(pi > 0.0 && pi < 1.0)) continue;
    any_in_range = true;

    RngSeed point_seed{seed.value ^ derive_seed(static_cast<std::uint64_t>(i), 0)};
    risk::MixConfig mix;
    mix.pi = pi;
    mix.alpha = tuples.effective_alpha();
    mix.min_gap_epsilon = config.min_gap_epsilon;

    eval::SweepPoint point;
    point.pi = pi;
    point.delta = deltas[i];
    try {
      for (std::size_t s = 0; s < config.seeds; ++s) {
        model::TrainConfig tcfg = config.train;
        tcfg.seed = derive_seed(point_seed, s);
        auto fit = model::train_ntmp(tuples, pool, mix, config.loss, tcfg);
        fit.scorer.score_batch(audit_test, scores);
        double value = 0.0;
        if (config.metric == SweepMetric::AveragePrecision) {
          value = eval::average_precision(scores, audit_labels);
        } else {
          std::vector<int> preds;
          preds.reserve(scores.size());
          for (double v : scores) preds.push_back(v > 0.0 ? 1 : -1);
          value = eval::confusion_metrics(preds, audit_labels).macro_f1;
        }
        point.seed_values.push_back(value);
      }
      point.mean = mean(point.seed_values);
      if (point.seed_values.size() >= 2) {
        point.stddev = sample_stddev(point.seed_values);
        auto ci = eval::bootstrap_ci(point.seed_values, config.bootstrap_b, 0.95,
                                     derive_seed(point_seed, 1000));
        point.ci_low = ci.low;
        point.ci_high = ci.high;
      } else {
        point.stddev = 0.0;
        point.ci_low = point.ci_high = point.mean;
      }
    } catch (const risk::IllConditionedError&) {
      point.ill_conditioned = true;
      point.seed_values.clear();
      point.mean = point.stddev = point.ci_low = point.ci_high = nan;
    } catch (const risk::UnsplittableDegenerateError&) {
      point.ill_conditioned = true;
      point.seed_values.clear();
      point.mean = point.stddev = point.ci_low = point.ci_high = nan;
    }
    out.points.push_back(point);
  }
  if (!any_in_range) {
    throw std::invalid_argument("delta_sweep: no grid prior lies inside (0,1)");
  }
  return out;
}

}  // namespace ntmp::prior
