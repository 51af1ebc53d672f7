#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ntmp/core.hpp"

namespace ntmp::eval {

struct ConfusionMetrics {
  double accuracy = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double macro_f1 = 0.0;
};

// Zero-denominator conventions: precision is 0 with no predicted
// positives, F1 is 0 when precision and recall are both 0, and a rate
// whose class is absent is 0.
ConfusionMetrics confusion_metrics(const std::vector<int>& predictions,
                                   const std::vector<int>& labels);

// Step-sum over the descending-score sweep; tied scores enter as one
// group. Throws when there is no positive label.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

// Mann-Whitney form with ties counted half. Throws unless both
// classes are present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Bin-based calibration error over equal-width right-closed bins of
// the positive-class probability; a bin compares its mean probability
// against its positive-label rate. p = 0 lands in the first bin.
double ece(const std::vector<double>& probabilities, const std::vector<int>& labels,
           std::size_t bins = 15);

double brier(const std::vector<double>& probabilities, const std::vector<int>& labels);

// The scorer emits margins; calibration metrics need probabilities.
// p = sigma(score / temperature).
double score_to_probability(double score, double temperature = 1.0);
std::vector<double> scores_to_probabilities(const std::vector<double>& scores,
                                            double temperature = 1.0);

struct TemperatureFit {
  double temperature = 1.0;
  // Single-class validation cannot rank temperatures; T stays 1.
  bool degenerate = false;
};

// Scalar temperature minimizing validation NLL, found by
// golden-section search over log T in [-3, 3] to tolerance 1e-5.
TemperatureFit temperature_scale(const std::vector<double>& logits,
                                 const std::vector<int>& labels);

struct WilcoxonResult {
  double p_value = 1.0;
  std::size_t n_nonzero = 0;
  // Fewer than 5 nonzero differences carry no evidence; p stays 1.
  bool degenerate = false;
};

// Two-sided paired signed-rank test. Zero differences are dropped,
// tied magnitudes get average ranks. Exact null distribution up to
// exact_cutoff nonzero pairs, normal approximation with tie and
// continuity corrections above it.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    std::size_t exact_cutoff = 25);

// Step-down adjustment: sort ascending, chain running maxima of
// (m-rank+1)*p, cap at 1, return in the original order.
std::vector<double> holm_adjust(const std::vector<double>& p_values);

// (#{x_i > y_j} - #{x_i < y_j}) / (n_x * n_y), signed so that
// positive favors the first argument.
double cliffs_delta(const std::vector<double>& x, const std::vector<double>& y);

enum class CliffsMagnitude { Negligible, Small, Medium, Large };
CliffsMagnitude cliffs_magnitude(double delta);
std::string cliffs_magnitude_name(CliffsMagnitude magnitude);

struct BootstrapCi {
  double low = 0.0;
  double high = 0.0;
};

// Percentile interval of the resampled mean; deterministic under the
// seed.
BootstrapCi bootstrap_ci(const std::vector<double>& values, std::size_t b, double level,
                         RngSeed seed);
inline BootstrapCi bootstrap_ci(const std::vector<double>& values, RngSeed seed) {
  return bootstrap_ci(values, 10000, 0.95, seed);
}

// Rank correlation with average ranks on both sides.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct MetricReport {
  double accuracy = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double macro_f1 = 0.0;
  double ap = 0.0;
  double auroc = 0.0;
  double ece = 0.0;
  double brier = 0.0;
  double ece_ts = 0.0;
  double brier_ts = 0.0;
  double temperature = 1.0;
};

// Full report for margin scores: threshold at 0 for the confusion
// block, sigma(score) for calibration, temperature fitted on the
// validation pair and applied to the test scores for the _ts block.
MetricReport metric_report(const std::vector<double>& test_scores,
                           const std::vector<int>& test_labels,
                           const std::vector<double>& val_scores,
                           const std::vector<int>& val_labels, std::size_t bins = 15);

std::string metric_report_to_json(const MetricReport& report);
std::string metric_report_csv_header();
std::string metric_report_csv_row(const MetricReport& report);

// One grid point of a prior sweep: the priors trained with, the
// per-seed metric values, and their aggregate statistics.
struct SweepPoint {
  double pi = 0.0;
  double delta = 0.0;
  std::vector<double> seed_values;
  double mean = 0.0;
  double stddev = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool ill_conditioned = false;
};

struct SweepResult {
  double pi_center = 0.0;
  std::string metric_name;
  std::vector<SweepPoint> points;
};

struct RobustWindow {
  double delta_min = 0.0;
  double delta_max = 0.0;
  std::optional<double> delta_crit;
  double epsilon = 0.02;
  double w_star = 0.05;
};

// Maximal contiguous robust gap interval around the center: a gap is
// robust when every grid point at that |delta| drops at most epsilon
// below the center mean and has CI width at most w_star. delta_crit
// is the smallest gap whose CI width reaches w_star, absent when none
// does. Ill-conditioned points count as infinitely wide.
RobustWindow robustness_window(const SweepResult& sweep, double epsilon = 0.02,
                               double w_star = 0.05);

// Long form: one row per (grid point, seed).
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);

// Aggregate form consumed by robustness_window; a leading comment
// carries the center and metric name so the file round-trips. When a
// window is given it is appended as a trailing comment.
void write_sweep_aggregate_csv(std::ostream& os, const SweepResult& sweep,
                               const RobustWindow* window = nullptr);
SweepResult read_sweep_aggregate_csv(std::istream& is);

}  // namespace ntmp::eval
