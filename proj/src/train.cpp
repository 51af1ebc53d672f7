#include "ntmp/train.hpp"

#include "train_detail.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace ntmp::model {

namespace {

using detail::check_finite_params;
using detail::sample_distinct;
using detail::OptimizerState;

void validate_config(const TrainConfig& tcfg) {
  if (tcfg.epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (tcfg.batch_tuples < 1) throw std::invalid_argument("batch_tuples must be at least 1");
  if (!(tcfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (tcfg.margin_epsilon < 0.0) throw std::invalid_argument("margin_epsilon must be nonnegative");
  if (tcfg.weight_decay < 0.0) throw std::invalid_argument("weight_decay must be nonnegative");
}

risk::TrainingPlan build_plan(const TupleDataset& tuples, const risk::MixConfig& cfg,
                              const TrainConfig& tcfg) {
  switch (tcfg.plan_mode) {
    case PlanMode::Pooled:
      return risk::pooled_plan(tuples, cfg.pi, tcfg.margin_epsilon);
    case PlanMode::StratifyByAlpha:
      return risk::stratified_by_alpha_plan(tuples, cfg.pi, tcfg.margin_epsilon);
    case PlanMode::Auto:
      break;
  }
  return risk::stratify_and_solve(tuples, cfg.pi, tcfg.stratify_tau, tcfg.margin_epsilon);
}

double weighted_unclamped(const risk::TrainingPlan& plan, const risk::StratifiedRisk& risks) {
  double total = 0.0;
  for (std::size_t s = 0; s < plan.strata.size(); ++s) {
    total += plan.strata[s].agg_weight * plan.strata[s].margin_weight *
             risks.per_stratum[s].total_unclamped;
  }
  return total;
}

}  // namespace

TrainResult train_ntmp(const TupleDataset& tuples, const UnlabeledPool& pool,
                       const risk::MixConfig& cfg, const LossSpec& loss,
                       const TrainConfig& tcfg,
                       const std::vector<std::vector<int>>* audit_labels) {
  validate_config(tcfg);
  if (tuples.tuples.empty()) throw std::invalid_argument("tuple dataset is empty");
  if (pool.samples.empty()) throw std::invalid_argument("unlabeled pool is empty");
  if (tcfg.batch_tuples > tuples.tuples.size()) {
    throw std::invalid_argument("batch_tuples exceeds the number of tuples");
  }
  std::size_t batch_pool = tcfg.batch_unlabeled;
  if (batch_pool == 0) {
    double per_tuple = static_cast<double>(tuples.instance_count()) /
                       static_cast<double>(tuples.tuples.size());
    batch_pool = static_cast<std::size_t>(
        std::llround(per_tuple * static_cast<double>(tcfg.batch_tuples)));
    batch_pool = std::max<std::size_t>(batch_pool, 1);
  }
  if (batch_pool > pool.samples.size()) {
    throw std::invalid_argument("unlabeled batch size exceeds the pool size");
  }
  if (audit_labels && audit_labels->size() != tuples.tuples.size()) {
    throw std::invalid_argument("audit label rows do not match the tuple count");
  }

  auto plan = build_plan(tuples, cfg, tcfg);

  // Stratum membership by tuple index, for regrouping batches.
  std::vector<std::size_t> stratum_of(tuples.tuples.size());
  for (std::size_t s = 0; s < plan.strata.size(); ++s) {
    for (std::size_t t : plan.strata[s].tuple_indices) stratum_of[t] = s;
  }

  Rng init_rng(derive_seed(tcfg.seed, 0));
  Rng batch_rng(derive_seed(tcfg.seed, 1));
  auto scorer = Scorer::make(tcfg.scorer, init_rng);
  OptimizerState opt(tcfg.optimizer, scorer.param_count(), tcfg.learning_rate,
                     tcfg.weight_decay);

  std::vector<std::size_t> tuple_scratch(tuples.tuples.size());
  std::iota(tuple_scratch.begin(), tuple_scratch.end(), 0);
  std::vector<std::size_t> pool_scratch(pool.samples.size());
  std::iota(pool_scratch.begin(), pool_scratch.end(), 0);

  std::size_t steps_per_epoch =
      std::max<std::size_t>(1, tuples.tuples.size() / tcfg.batch_tuples);

  TrainResult result{std::move(scorer), {}, plan};
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      auto tuple_idx = sample_distinct(tuple_scratch, tcfg.batch_tuples, batch_rng);
      auto pool_idx = sample_distinct(pool_scratch, batch_pool, batch_rng);

      TupleDataset batch_tuples;
      batch_tuples.tuples.reserve(tuple_idx.size());
      std::vector<std::vector<std::size_t>> by_stratum(plan.strata.size());
      for (std::size_t b = 0; b < tuple_idx.size(); ++b) {
        batch_tuples.tuples.push_back(tuples.tuples[tuple_idx[b]]);
        by_stratum[stratum_of[tuple_idx[b]]].push_back(b);
      }
      UnlabeledPool batch_unlabeled;
      batch_unlabeled.samples.reserve(pool_idx.size());
      for (std::size_t p : pool_idx) batch_unlabeled.samples.push_back(pool.samples[p]);
      batch_unlabeled.declared_prior = pool.declared_prior;
      batch_unlabeled.prior_source = pool.prior_source;

      // Rebuild the plan at batch level: rates and margin weights
      // come from the batch's own composition.
      risk::TrainingPlan batch_plan;
      batch_plan.pi_hat = plan.pi_hat;
      batch_plan.min_gap_epsilon = plan.min_gap_epsilon;
      double batch_instances = static_cast<double>(batch_tuples.instance_count());
      for (std::size_t s = 0; s < by_stratum.size(); ++s) {
        if (by_stratum[s].empty()) continue;
        risk::Stratum stratum;
        stratum.tuple_indices = by_stratum[s];
        std::size_t pos = 0, total = 0;
        for (std::size_t b : by_stratum[s]) {
          pos += static_cast<std::size_t>(batch_tuples.tuples[b].m);
          total += static_cast<std::size_t>(batch_tuples.tuples[b].n);
          stratum.instance_count += batch_tuples.tuples[b].instances.size();
        }
        stratum.alpha_bar = static_cast<double>(pos) / static_cast<double>(total);
        double gap = std::abs(plan.pi_hat - stratum.alpha_bar);
        double ratio = tcfg.margin_epsilon > 0.0
                           ? gap / tcfg.margin_epsilon
                           : std::numeric_limits<double>::infinity();
        stratum.margin_weight = std::min(1.0, ratio * ratio);
        stratum.down_weighted = stratum.margin_weight < 1.0;
        stratum.agg_weight = static_cast<double>(stratum.instance_count) / batch_instances;
        batch_plan.strata.push_back(std::move(stratum));
      }

      auto grad = risk::plan_gradient(result.scorer, batch_tuples, batch_unlabeled, batch_plan,
                                      loss, tcfg.clamp_kind, tcfg.clamp_grouping);
      opt.step(result.scorer.params(), grad);
      check_finite_params(result.scorer, epoch);
    }

    auto risks = risk::stratified_risk(result.scorer, tuples, pool, plan, loss, tcfg.clamp_kind,
                                       tcfg.clamp_grouping);
    TraceRow row;
    row.epoch = epoch;
    row.risk_clamped = risks.total;
    row.risk_unclamped = weighted_unclamped(plan, risks);
    if (!std::isfinite(row.risk_clamped) || !std::isfinite(row.risk_unclamped)) {
      throw std::runtime_error("training diverged: non-finite risk at epoch " +
                               std::to_string(epoch));
    }
    if (audit_labels) {
      std::size_t correct = 0, total = 0;
      for (std::size_t t = 0; t < tuples.tuples.size(); ++t) {
        const auto& labels = (*audit_labels)[t];
        for (std::size_t s = 0; s < tuples.tuples[t].instances.size(); ++s) {
          correct += result.scorer.predict(tuples.tuples[t].instances[s].features) == labels[s];
          ++total;
        }
      }
      row.audit_accuracy = static_cast<double>(correct) / static_cast<double>(total);
    }
    result.trace.push_back(row);
  }
  return result;
}

TrainResult train_supervised(const std::vector<InstanceSample>& labeled, const LossSpec& loss,
                             const TrainConfig& tcfg, std::size_t batch_instances) {
  validate_config(tcfg);
  if (labeled.empty()) throw std::invalid_argument("labeled dataset is empty");
  if (batch_instances < 1) throw std::invalid_argument("batch_instances must be at least 1");
  batch_instances = std::min(batch_instances, labeled.size());
  for (const auto& s : labeled) {
    if (!s.label.has_value()) throw std::invalid_argument("supervised training needs labels");
  }

  Rng init_rng(derive_seed(tcfg.seed, 0));
  Rng batch_rng(derive_seed(tcfg.seed, 1));
  auto scorer = Scorer::make(tcfg.scorer, init_rng);
  OptimizerState opt(tcfg.optimizer, scorer.param_count(), tcfg.learning_rate,
                     tcfg.weight_decay);

  std::vector<std::size_t> scratch(labeled.size());
  std::iota(scratch.begin(), scratch.end(), 0);
  std::size_t steps_per_epoch = std::max<std::size_t>(1, labeled.size() / batch_instances);

  auto mean_risk = [&](const Scorer& g) {
    double acc = 0.0;
    for (const auto& s : labeled) {
      double v = g.score(s.features);
      acc += *s.label == 1 ? pos_loss(loss, v) : neg_loss(loss, v);
    }
    return acc / static_cast<double>(labeled.size());
  };

  TrainResult result{std::move(scorer), {}, {}};
  std::vector<double> grad(result.scorer.param_count());
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      auto idx = sample_distinct(scratch, batch_instances, batch_rng);
      std::fill(grad.begin(), grad.end(), 0.0);
      double inv = 1.0 / static_cast<double>(idx.size());
      for (std::size_t i : idx) {
        const auto& s = labeled[i];
        double v = result.scorer.score(s.features);
        double upstream =
            (*s.label == 1 ? pos_loss_dscore(loss, v) : neg_loss_dscore(loss, v)) * inv;
        if (upstream != 0.0) result.scorer.accumulate_score_grad(s.features, upstream, grad);
      }
      opt.step(result.scorer.params(), grad);
      check_finite_params(result.scorer, epoch);
    }
    TraceRow row;
    row.epoch = epoch;
    row.risk_unclamped = mean_risk(result.scorer);
    row.risk_clamped = row.risk_unclamped;
    if (!std::isfinite(row.risk_unclamped)) {
      throw std::runtime_error("training diverged: non-finite risk at epoch " +
                               std::to_string(epoch));
    }
    std::size_t correct = 0;
    for (const auto& s : labeled) {
      correct += result.scorer.predict(s.features) == *s.label;
    }
    row.audit_accuracy = static_cast<double>(correct) / static_cast<double>(labeled.size());
    result.trace.push_back(row);
  }
  return result;
}

std::vector<int> predict_labels(const Scorer& scorer, const std::vector<InstanceSample>& samples,
                                double threshold) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(scorer.predict(s.features, threshold));
  return out;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "epoch,risk_unclamped,risk_clamped,audit_accuracy\n";
  for (const auto& row : trace) {
    os << row.epoch << ',' << format_double(row.risk_unclamped) << ','
       << format_double(row.risk_clamped) << ',';
    if (row.audit_accuracy.has_value()) os << format_double(*row.audit_accuracy);
    os << '\n';
  }
}

}  // namespace ntmp::model
