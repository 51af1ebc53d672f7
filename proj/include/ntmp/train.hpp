#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "ntmp/core.hpp"
#include "ntmp/model.hpp"
#include "ntmp/risk.hpp"

namespace ntmp::model {

enum class Optimizer { Sgd, Adam };

// How the trainer turns a tuple dataset into strata:
//   Auto            rate-collision handling (single pooled stratum
//                   when |alpha_bar - pi| >= tau, else split)
//   Pooled          always one stratum at the effective rate
//   StratifyByAlpha one stratum per distinct declared rate
enum class PlanMode { Auto, Pooled, StratifyByAlpha };

struct TrainConfig {
  ScorerSpec scorer;
  int epochs = 100;
  std::size_t batch_tuples = 64;
  // 0 means automatic: one pool sample per tuple instance, so both
  // sides of the objective see equal instance counts per batch.
  std::size_t batch_unlabeled = 0;
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-4;
  ClampKind clamp_kind = ClampKind::Abs;
  risk::ClampGrouping clamp_grouping = risk::ClampGrouping::ByClass;
  RngSeed seed{0};
  double margin_epsilon = 0.05;
  double weight_decay = 0.0;
  PlanMode plan_mode = PlanMode::Auto;
  double stratify_tau = 0.05;
};

struct TraceRow {
  int epoch = 0;
  double risk_unclamped = 0.0;
  double risk_clamped = 0.0;
  std::optional<double> audit_accuracy;
};

struct TrainResult {
  Scorer scorer;
  std::vector<TraceRow> trace;
  risk::TrainingPlan plan;
};

// Minimizes the clamped unbiased risk over mixed mini-batches of
// tuples and pool samples. Batches whose rate drifts inside the
// conditioning margin are down-weighted by min(1, (gap/epsilon)^2).
// audit_labels, when given (one vector per tuple, aligned with
// slots), adds a per-epoch accuracy column to the trace.
TrainResult train_ntmp(const TupleDataset& tuples, const UnlabeledPool& pool,
                       const risk::MixConfig& cfg, const LossSpec& loss,
                       const TrainConfig& tcfg,
                       const std::vector<std::vector<int>>* audit_labels = nullptr);

// Fully supervised twin of train_ntmp: same optimizers, same trace
// shape, objective is the plain mean loss over labeled samples.
// Used by oracle comparisons and by downstream consumers that need a
// generic binary classifier.
TrainResult train_supervised(const std::vector<InstanceSample>& labeled, const LossSpec& loss,
                             const TrainConfig& tcfg, std::size_t batch_instances = 256);

std::vector<int> predict_labels(const Scorer& scorer, const std::vector<InstanceSample>& samples,
                                double threshold = 0.0);

// CSV columns: epoch,risk_unclamped,risk_clamped,audit_accuracy
// (last field empty when no audit labels were supplied).
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace ntmp::model
