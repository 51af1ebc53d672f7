#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntmp/core.hpp"
#include "ntmp/model.hpp"

namespace ntmp::risk {

// Below this |pi - alpha| the 2x2 mixture system is numerically
// singular and every downstream quantity blows up.
inline constexpr double kHardGapThreshold = 1e-9;

class IllConditionedError : public std::runtime_error {
 public:
  IllConditionedError(double pi, double alpha);
  double gap() const { return gap_; }

 private:
  double gap_;
};

class UnsplittableDegenerateError : public std::runtime_error {
 public:
  explicit UnsplittableDegenerateError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MixConfig {
  double pi = 0.5;
  double alpha = 1.0 / 3.0;
  // Gaps below this are legal but poorly conditioned; the trainer
  // down-weights batches inside the margin instead of failing.
  double min_gap_epsilon = 0.05;
};

struct UreCoefficients {
  double c_u_pos = 0.0;
  double c_t_pos = 0.0;
  double c_u_neg = 0.0;
  double c_t_neg = 0.0;
};

struct RiskComponents {
  double r_tuple = 0.0;
  double r_unlabeled = 0.0;
  double total_unclamped = 0.0;
  double total_clamped = 0.0;
  ClampKind clamp_kind = ClampKind::None;
};

std::string risk_components_to_json(const RiskComponents& rc);

// Inverts the two-mixture system at a single point: given marginal
// density values p_U and p_T, returns the class conditionals
// (p_pos, p_neg). Throws IllConditionedError when pi ~= alpha.
std::pair<double, double> identify_conditionals(double p_u_val, double p_t_val,
                                                const MixConfig& cfg);

// The four signed coefficients of the unbiased risk rewrite. They
// always sum to exactly 1.
UreCoefficients ure_coefficients(const MixConfig& cfg);

// Per-tuple weighting of the tuple-side loss means. Uniform spreads
// mass evenly over instances (for mixed tuple sizes this is the flat
// per-instance mean, which matches the effective rate). A custom
// vector must be nonnegative, sum to 1, and match every tuple's size.
using InTupleWeights = std::optional<std::vector<double>>;

struct UreTerms {
  double e_t_phi = 0.0;  // tuple-side mean of the positive-label loss
  double e_t_psi = 0.0;  // tuple-side mean of the negative-label loss
  double e_u_phi = 0.0;  // pool-side mean of the positive-label loss
  double e_u_psi = 0.0;  // pool-side mean of the negative-label loss
};

UreTerms ure_terms(const model::Scorer& scorer, const TupleDataset& tuples,
                   const UnlabeledPool& pool, const LossSpec& loss,
                   const InTupleWeights& weights = std::nullopt);

RiskComponents combine_ure(const UreTerms& terms, const UreCoefficients& coeffs,
                           ClampKind clamp_kind);

RiskComponents empirical_ure(const model::Scorer& scorer, const TupleDataset& tuples,
                             const UnlabeledPool& pool, const MixConfig& cfg,
                             const LossSpec& loss, ClampKind clamp_kind = ClampKind::None,
                             const InTupleWeights& weights = std::nullopt);

// Re-applies a clamp to already-computed components, keeping the
// unclamped fields intact.
RiskComponents clamp(const RiskComponents& components, ClampKind kind);

// Gradient of the clamped objective w.r.t. scorer parameters.
std::vector<double> ure_gradient(const model::Scorer& scorer, const TupleDataset& tuples,
                                 const UnlabeledPool& pool, const MixConfig& cfg,
                                 const LossSpec& loss, ClampKind clamp_kind);

// Instance-share-weighted mean of the per-tuple positive rates,
// i.e. sum(m_t) / sum(n_t).
double effective_alpha(const TupleDataset& tuples);

// A stratum is a group of tuples trained against a shared pool with
// its own positive-rate estimate and aggregation weight.
struct Stratum {
  std::vector<std::size_t> tuple_indices;
  double alpha_bar = 0.0;
  std::size_t instance_count = 0;
  // Share of all tuple instances that live in this stratum.
  double agg_weight = 1.0;
  // min(1, (gap/epsilon)^2): shrinks strata whose rate sits inside
  // the conditioning margin around pi_hat.
  double margin_weight = 1.0;
  bool down_weighted = false;
};

struct TrainingPlan {
  double pi_hat = 0.5;
  double min_gap_epsilon = 0.05;
  std::vector<Stratum> strata;
};

// One stratum holding every tuple, rate = effective alpha.
TrainingPlan pooled_plan(const TupleDataset& tuples, double pi_hat,
                         double min_gap_epsilon = 0.05);

// One stratum per distinct declared rate m_t/n_t.
TrainingPlan stratified_by_alpha_plan(const TupleDataset& tuples, double pi_hat,
                                      double min_gap_epsilon = 0.05);

// Rate-collision handling: keep a single pooled stratum when the
// pooled rate is at least tau away from pi_hat; otherwise split into
// two strata with distinct rates (the split over sorted distinct
// rates that pushes the group means furthest apart). A dataset whose
// only rate coincides with pi_hat cannot be separated at all.
TrainingPlan stratify_and_solve(const TupleDataset& tuples, double pi_hat, double tau,
                                double min_gap_epsilon = 0.05);

// How the clamp partitions the four signed terms of the rewrite.
// BySource clamps the tuple-side and pool-side sums separately, which
// is how the flat estimator reports its components. ByClass first
// recombines the terms into the recovered positive-class and
// negative-class risk pieces (both nonnegative in population, so the
// clamp cannot move the population minimizer) and clamps those.
enum class ClampGrouping { BySource, ByClass };

struct StratifiedRisk {
  double total = 0.0;
  std::vector<RiskComponents> per_stratum;
};

// Weighted sum over strata of the per-stratum clamped objective,
// each stratum using coefficients built from (pi_hat, alpha_s) and
// sharing the same pool. Under ByClass the per-stratum r_tuple and
// r_unlabeled fields still hold the source sums (their total is the
// same either way); only total_clamped reflects the grouping.
StratifiedRisk stratified_risk(const model::Scorer& scorer, const TupleDataset& tuples,
                               const UnlabeledPool& pool, const TrainingPlan& plan,
                               const LossSpec& loss, ClampKind clamp_kind,
                               ClampGrouping grouping = ClampGrouping::ByClass);

std::vector<double> plan_gradient(const model::Scorer& scorer, const TupleDataset& tuples,
                                  const UnlabeledPool& pool, const TrainingPlan& plan,
                                  const LossSpec& loss, ClampKind clamp_kind,
                                  ClampGrouping grouping = ClampGrouping::ByClass);

struct BiasBound {
  bool unbounded = false;
  double value = 0.0;
};

struct PriorBiasBounds {
  double gamma = 0.0;
  bool unbounded = false;
  double risk_bias = 0.0;    // 2 B |delta| / gamma^2
  double excess_risk = 0.0;  // 4 B |delta| / gamma^2
};

// Worst-case risk bias when training with a misreported prior
// pi_hat != pi. gamma is the distance from alpha to the closed
// interval between pi and pi_hat; alpha inside it means no finite
// bound exists.
PriorBiasBounds prior_bias_bound(double B, double pi, double pi_hat, double alpha);

// Bias bound under noisy per-tuple counts: (2 B / eta^2) * E|a_hat - a|,
// where eta lower-bounds the per-stratum gap |pi - alpha_s|.
BiasBound count_bias_bound(double B, double expected_abs_alpha_err, double eta_lower);

// Same bound via a rate standard deviation, since E|a_hat - a| <= sigma.
BiasBound count_bias_bound_sigma(double B, double sigma_alpha, double eta_lower);

}  // namespace ntmp::risk
