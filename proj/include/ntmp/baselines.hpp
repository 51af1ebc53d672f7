#pragma once

#include <cstddef>
#include <vector>

#include "ntmp/core.hpp"
#include "ntmp/model.hpp"
#include "ntmp/risk.hpp"
#include "ntmp/train.hpp"

namespace ntmp::baselines {

// Two unlabeled pools whose distinct known priors stand in for
// (pi, alpha) in the same 2x2 inversion the tuple objective uses.
// clamp_kind = Abs gives the corrected variant, nonnegative by
// construction.
struct UuConfig {
  double prior_1 = 0.5;
  double prior_2 = 1.0 / 3.0;
  ClampKind clamp_kind = ClampKind::None;
};

// Risk reconstruction from the two pools. pool_1 plays the reference
// side (prior_1 in the pi slot), pool_2 the contrasting side
// (prior_2 in the alpha slot); with prior_1 = pi and prior_2 = alpha
// on a flattened tuple pool this reproduces the tuple estimator.
risk::RiskComponents uu_risk(const model::Scorer& scorer,
                             const std::vector<InstanceSample>& pool_1,
                             const std::vector<InstanceSample>& pool_2, const UuConfig& cfg,
                             const LossSpec& loss);

// What a baseline trainer hands back. Baselines have no stratification
// plan; the trace carries the full-data objective per epoch (both risk
// columns, clamped and not, where the method makes the distinction).
struct BaselineFit {
  model::Scorer scorer;
  std::vector<model::TraceRow> trace;
};

// Minimizes the (optionally clamped) reconstruction risk over paired
// mini-batches of batch_instances drawn from each pool per step.
// Seeds follow the shared trainer contract: one stream for scorer
// init, one for batch draws.
BaselineFit train_uu(const std::vector<InstanceSample>& pool_1,
                     const std::vector<InstanceSample>& pool_2, const UuConfig& cfg,
                     const LossSpec& loss, const model::TrainConfig& tcfg,
                     std::size_t batch_instances = 256);

enum class KmInit { Forgy, PlusPlus };

struct KmeansModel {
  std::vector<double> centroid_pos;  // centroid of the cluster labeled +1
  std::vector<double> centroid_neg;
  std::vector<int> labels;  // per input sample, +1 or -1
  std::size_t iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm with k = 2 (shift < 1e-8 or 300 iterations). The
// cluster whose size fraction sits nearer declared_prior is labeled
// +1; exact ties go to the cluster with the larger mean projection
// onto the first principal direction.
KmeansModel kmeans_prior_matched(const UnlabeledPool& pool, KmInit init, double declared_prior,
                                 RngSeed seed);

// Nearest-centroid label for a new point.
int km_predict(const KmeansModel& model, const std::vector<double>& x);
std::vector<int> km_predict_batch(const KmeansModel& model,
                                  const std::vector<InstanceSample>& xs);

// Cluster pseudo-labels feeding the supervised trainer with logistic
// loss (self-training style).
BaselineFit cluster_then_classify(const UnlabeledPool& pool, KmInit init, double declared_prior,
                                  const model::TrainConfig& tcfg);

struct LlpConfig {
  // Weight of the instance-entropy penalty added to the bag loss.
  double entropy_weight = 0.01;
};

// Jensen-Shannon divergence between Bernoulli(p) and Bernoulli(q), in
// nats. Symmetric, zero iff p = q, at most ln 2.
double js_bernoulli(double p, double q);

// Bag losses on tuple proportions: the mean instance sigmoid output
// of each tuple is matched to its declared rate, by cross-entropy or
// by JS divergence, plus the entropy penalty. Bag means are clipped
// to [1e-7, 1 - 1e-7] before the logs.
double llp_bagce_loss(const model::Scorer& scorer, const TupleDataset& tuples,
                      const LlpConfig& cfg = {});
double llp_js_loss(const model::Scorer& scorer, const TupleDataset& tuples,
                   const LlpConfig& cfg = {});

enum class LlpKind { BagCe, Js };

BaselineFit train_llp(const TupleDataset& tuples, LlpKind kind, const LlpConfig& cfg,
                      const model::TrainConfig& tcfg);

}  // namespace ntmp::baselines
