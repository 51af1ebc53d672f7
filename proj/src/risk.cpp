#include "ntmp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

namespace ntmp::risk {

namespace {

void validate_cfg(const MixConfig& cfg) {
  if (!(cfg.pi > 0.0 && cfg.pi < 1.0)) {
    throw std::invalid_argument("pi must lie strictly inside (0,1)");
  }
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in [0,1]");
  }
  if (cfg.min_gap_epsilon < 0.0) {
    throw std::invalid_argument("min_gap_epsilon must be nonnegative");
  }
  if (std::abs(cfg.pi - cfg.alpha) < kHardGapThreshold) {
    throw IllConditionedError(cfg.pi, cfg.alpha);
  }
}

void validate_weights(const std::vector<double>& w) {
  if (w.empty()) throw std::invalid_argument("in-tuple weight vector is empty");
  double total = 0.0;
  for (double v : w) {
    if (v < 0.0) throw std::invalid_argument("in-tuple weights must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("in-tuple weights must sum to 1");
  }
}

struct GapInfo {
  double alpha_bar = 0.0;
  double gap = 0.0;
};

GapInfo subset_rate(const TupleDataset& tuples, const std::vector<std::size_t>& idx,
                    double pi_hat) {
  std::size_t pos = 0, total = 0;
  for (std::size_t t : idx) {
    pos += static_cast<std::size_t>(tuples.tuples[t].m);
    total += static_cast<std::size_t>(tuples.tuples[t].n);
  }
  GapInfo info;
  info.alpha_bar = static_cast<double>(pos) / static_cast<double>(total);
  info.gap = std::abs(pi_hat - info.alpha_bar);
  return info;
}

Stratum make_stratum(const TupleDataset& tuples, std::vector<std::size_t> idx, double pi_hat,
                     double epsilon) {
  Stratum s;
  auto info = subset_rate(tuples, idx, pi_hat);
  s.alpha_bar = info.alpha_bar;
  s.instance_count = 0;
  for (std::size_t t : idx) s.instance_count += tuples.tuples[t].instances.size();
  s.tuple_indices = std::move(idx);
  double ratio = epsilon > 0.0 ? info.gap / epsilon : std::numeric_limits<double>::infinity();
  s.margin_weight = std::min(1.0, ratio * ratio);
  s.down_weighted = s.margin_weight < 1.0;
  return s;
}

void finalize_agg_weights(TrainingPlan& plan, const TupleDataset& tuples) {
  double total = static_cast<double>(tuples.instance_count());
  for (auto& s : plan.strata) {
    s.agg_weight = static_cast<double>(s.instance_count) / total;
  }
}

// Exact key for grouping tuples that declare the same rate.
std::pair<int, int> reduced_rate(int m, int n) {
  int g = std::gcd(m, n);
  if (g == 0) return {0, 1};
  return {m / g, n / g};
}

std::vector<std::size_t> all_indices(const TupleDataset& tuples) {
  std::vector<std::size_t> idx(tuples.tuples.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void check_datasets(const TupleDataset& tuples, const UnlabeledPool& pool) {
  if (tuples.tuples.empty()) throw std::invalid_argument("tuple dataset is empty");
  if (pool.samples.empty()) throw std::invalid_argument("unlabeled pool is empty");
}

}  // namespace

IllConditionedError::IllConditionedError(double pi, double alpha)
    : std::runtime_error("mixture rates are not identifiable: |pi - alpha| = " +
                         format_double(std::abs(pi - alpha)) + " with pi = " +
                         format_double(pi) + ", alpha = " + format_double(alpha)),
      gap_(std::abs(pi - alpha)) {}

std::string risk_components_to_json(const RiskComponents& rc) {
  nlohmann::json j;
  j["r_tuple"] = rc.r_tuple;
  j["r_unlabeled"] = rc.r_unlabeled;
  j["total_unclamped"] = rc.total_unclamped;
  j["total_clamped"] = rc.total_clamped;
  j["clamp_kind"] = clamp_kind_name(rc.clamp_kind);
  return j.dump();
}

std::pair<double, double> identify_conditionals(double p_u_val, double p_t_val,
                                                const MixConfig& cfg) {
  validate_cfg(cfg);
  if (p_u_val < 0.0 || p_t_val < 0.0) {
    throw std::invalid_argument("density values must be nonnegative");
  }
  double det = cfg.pi - cfg.alpha;
  double p_pos = ((1.0 - cfg.alpha) * p_u_val - (1.0 - cfg.pi) * p_t_val) / det;
  double p_neg = (cfg.pi * p_t_val - cfg.alpha * p_u_val) / det;
  return {p_pos, p_neg};
}

UreCoefficients ure_coefficients(const MixConfig& cfg) {
  validate_cfg(cfg);
  double det = cfg.pi - cfg.alpha;
  UreCoefficients c;
  c.c_u_pos = cfg.pi * (1.0 - cfg.alpha) / det;
  c.c_t_pos = -cfg.pi * (1.0 - cfg.pi) / det;
  c.c_u_neg = -(1.0 - cfg.pi) * cfg.alpha / det;
  c.c_t_neg = (1.0 - cfg.pi) * cfg.pi / det;
  return c;
}

UreTerms ure_terms(const model::Scorer& scorer, const TupleDataset& tuples,
                   const UnlabeledPool& pool, const LossSpec& loss,
                   const InTupleWeights& weights) {
  check_datasets(tuples, pool);
  UreTerms terms;
  if (weights.has_value()) {
    validate_weights(*weights);
    double phi_acc = 0.0, psi_acc = 0.0;
    for (const auto& tup : tuples.tuples) {
      if (tup.instances.size() != weights->size()) {
        throw std::invalid_argument("in-tuple weight vector arity " +
                                    std::to_string(weights->size()) +
                                    " does not match tuple size " +
                                    std::to_string(tup.instances.size()));
      }
      for (std::size_t j = 0; j < tup.instances.size(); ++j) {
        double s = scorer.score(tup.instances[j].features);
        phi_acc += (*weights)[j] * pos_loss(loss, s);
        psi_acc += (*weights)[j] * neg_loss(loss, s);
      }
    }
    double n_tuples = static_cast<double>(tuples.tuples.size());
    terms.e_t_phi = phi_acc / n_tuples;
    terms.e_t_psi = psi_acc / n_tuples;
  } else {
    double phi_acc = 0.0, psi_acc = 0.0;
    std::size_t count = 0;
    for (const auto& tup : tuples.tuples) {
      for (const auto& inst : tup.instances) {
        double s = scorer.score(inst.features);
        phi_acc += pos_loss(loss, s);
        psi_acc += neg_loss(loss, s);
        ++count;
      }
    }
    terms.e_t_phi = phi_acc / static_cast<double>(count);
    terms.e_t_psi = psi_acc / static_cast<double>(count);
  }

  double phi_acc = 0.0, psi_acc = 0.0;
  for (const auto& inst : pool.samples) {
    double s = scorer.score(inst.features);
    phi_acc += pos_loss(loss, s);
    psi_acc += neg_loss(loss, s);
  }
  terms.e_u_phi = phi_acc / static_cast<double>(pool.samples.size());
  terms.e_u_psi = psi_acc / static_cast<double>(pool.samples.size());
  return terms;
}

RiskComponents combine_ure(const UreTerms& terms, const UreCoefficients& coeffs,
                           ClampKind clamp_kind) {
  RiskComponents rc;
  rc.r_tuple = coeffs.c_t_pos * terms.e_t_phi + coeffs.c_t_neg * terms.e_t_psi;
  rc.r_unlabeled = coeffs.c_u_pos * terms.e_u_phi + coeffs.c_u_neg * terms.e_u_psi;
  rc.total_unclamped = rc.r_tuple + rc.r_unlabeled;
  rc.total_clamped = apply_clamp(clamp_kind, rc.r_tuple) + apply_clamp(clamp_kind, rc.r_unlabeled);
  rc.clamp_kind = clamp_kind;
  return rc;
}

RiskComponents empirical_ure(const model::Scorer& scorer, const TupleDataset& tuples,
                             const UnlabeledPool& pool, const MixConfig& cfg,
                             const LossSpec& loss, ClampKind clamp_kind,
                             const InTupleWeights& weights) {
  auto coeffs = ure_coefficients(cfg);
  auto terms = ure_terms(scorer, tuples, pool, loss, weights);
  return combine_ure(terms, coeffs, clamp_kind);
}

RiskComponents clamp(const RiskComponents& components, ClampKind kind) {
  RiskComponents rc = components;
  rc.total_clamped = apply_clamp(kind, rc.r_tuple) + apply_clamp(kind, rc.r_unlabeled);
  rc.clamp_kind = kind;
  return rc;
}

std::vector<double> ure_gradient(const model::Scorer& scorer, const TupleDataset& tuples,
                                 const UnlabeledPool& pool, const MixConfig& cfg,
                                 const LossSpec& loss, ClampKind clamp_kind) {
  auto coeffs = ure_coefficients(cfg);
  auto terms = ure_terms(scorer, tuples, pool, loss);
  auto rc = combine_ure(terms, coeffs, clamp_kind);
  double g_t = clamp_subgradient(clamp_kind, rc.r_tuple);
  double g_u = clamp_subgradient(clamp_kind, rc.r_unlabeled);

  std::vector<double> grad(scorer.param_count(), 0.0);
  double n_t = static_cast<double>(tuples.instance_count());
  for (const auto& tup : tuples.tuples) {
    for (const auto& inst : tup.instances) {
      double s = scorer.score(inst.features);
      double upstream =
          g_t * (coeffs.c_t_pos * pos_loss_dscore(loss, s) +
                 coeffs.c_t_neg * neg_loss_dscore(loss, s)) / n_t;
      if (upstream != 0.0) scorer.accumulate_score_grad(inst.features, upstream, grad);
    }
  }
  double n_u = static_cast<double>(pool.samples.size());
  for (const auto& inst : pool.samples) {
    double s = scorer.score(inst.features);
    double upstream =
        g_u * (coeffs.c_u_pos * pos_loss_dscore(loss, s) +
               coeffs.c_u_neg * neg_loss_dscore(loss, s)) / n_u;
    if (upstream != 0.0) scorer.accumulate_score_grad(inst.features, upstream, grad);
  }
  return grad;
}

double effective_alpha(const TupleDataset& tuples) { return tuples.effective_alpha(); }

TrainingPlan pooled_plan(const TupleDataset& tuples, double pi_hat, double min_gap_epsilon) {
  if (tuples.tuples.empty()) throw std::invalid_argument("tuple dataset is empty");
  TrainingPlan plan;
  plan.pi_hat = pi_hat;
  plan.min_gap_epsilon = min_gap_epsilon;
  auto stratum = make_stratum(tuples, all_indices(tuples), pi_hat, min_gap_epsilon);
  if (std::abs(pi_hat - stratum.alpha_bar) < kHardGapThreshold) {
    throw IllConditionedError(pi_hat, stratum.alpha_bar);
  }
  plan.strata.push_back(std::move(stratum));
  finalize_agg_weights(plan, tuples);
  return plan;
}

TrainingPlan stratified_by_alpha_plan(const TupleDataset& tuples, double pi_hat,
                                      double min_gap_epsilon) {
  if (tuples.tuples.empty()) throw std::invalid_argument("tuple dataset is empty");
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t t = 0; t < tuples.tuples.size(); ++t) {
    groups[reduced_rate(tuples.tuples[t].m, tuples.tuples[t].n)].push_back(t);
  }
  TrainingPlan plan;
  plan.pi_hat = pi_hat;
  plan.min_gap_epsilon = min_gap_epsilon;
  std::vector<std::pair<double, std::vector<std::size_t>>> ordered;
  for (auto& [key, idx] : groups) {
    double a = static_cast<double>(key.first) / static_cast<double>(key.second);
    ordered.emplace_back(a, std::move(idx));
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [a, idx] : ordered) {
    (void)a;
    plan.strata.push_back(make_stratum(tuples, std::move(idx), pi_hat, min_gap_epsilon));
  }
  finalize_agg_weights(plan, tuples);
  return plan;
}

TrainingPlan stratify_and_solve(const TupleDataset& tuples, double pi_hat, double tau,
                                double min_gap_epsilon) {
  if (tuples.tuples.empty()) throw std::invalid_argument("tuple dataset is empty");
  if (tau <= 0.0) throw std::invalid_argument("tau must be positive");

  TrainingPlan plan;
  plan.pi_hat = pi_hat;
  plan.min_gap_epsilon = min_gap_epsilon;

  auto idx = all_indices(tuples);
  auto pooled = subset_rate(tuples, idx, pi_hat);
  if (pooled.gap >= tau) {
    plan.strata.push_back(make_stratum(tuples, std::move(idx), pi_hat, min_gap_epsilon));
    finalize_agg_weights(plan, tuples);
    return plan;
  }

  // Pooled rate collides with pi_hat; try to split on distinct
  // declared rates so each stratum regains an identifiability gap.
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t t = 0; t < tuples.tuples.size(); ++t) {
    groups[reduced_rate(tuples.tuples[t].m, tuples.tuples[t].n)].push_back(t);
  }

  if (groups.size() == 1) {
    if (pooled.gap < kHardGapThreshold) {
      throw UnsplittableDegenerateError(
          "every tuple declares rate " + format_double(pooled.alpha_bar) +
          ", which coincides with pi_hat = " + format_double(pi_hat) +
          "; no partition can separate them");
    }
    // A single rate close to (but distinct from) pi_hat: nothing to
    // split on, so keep one stratum shrunk by the margin rule.
    plan.strata.push_back(make_stratum(tuples, std::move(idx), pi_hat, min_gap_epsilon));
    finalize_agg_weights(plan, tuples);
    return plan;
  }

  std::vector<std::pair<double, std::vector<std::size_t>>> ordered;
  for (auto& [key, members] : groups) {
    double a = static_cast<double>(key.first) / static_cast<double>(key.second);
    ordered.emplace_back(a, std::move(members));
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Cut the sorted distinct rates at the boundary that pushes the two
  // group means furthest apart.
  std::size_t best_cut = 1;
  double best_sep = -1.0;
  for (std::size_t cut = 1; cut < ordered.size(); ++cut) {
    std::vector<std::size_t> lo, hi;
    for (std::size_t g = 0; g < ordered.size(); ++g) {
      auto& dst = g < cut ? lo : hi;
      dst.insert(dst.end(), ordered[g].second.begin(), ordered[g].second.end());
    }
    double sep = std::abs(subset_rate(tuples, lo, pi_hat).alpha_bar -
                          subset_rate(tuples, hi, pi_hat).alpha_bar);
    if (sep > best_sep) {
      best_sep = sep;
      best_cut = cut;
    }
  }
  std::vector<std::size_t> lo, hi;
  for (std::size_t g = 0; g < ordered.size(); ++g) {
    auto& dst = g < best_cut ? lo : hi;
    dst.insert(dst.end(), ordered[g].second.begin(), ordered[g].second.end());
  }
  std::sort(lo.begin(), lo.end());
  std::sort(hi.begin(), hi.end());
  plan.strata.push_back(make_stratum(tuples, std::move(lo), pi_hat, min_gap_epsilon));
  plan.strata.push_back(make_stratum(tuples, std::move(hi), pi_hat, min_gap_epsilon));
  finalize_agg_weights(plan, tuples);
  return plan;
}

namespace {

// The two class-conditional pieces recovered from the four terms:
// r_pos estimates pi * E_pos[phi], r_neg estimates (1-pi) * E_neg[psi].
std::pair<double, double> class_components(const UreTerms& terms,
                                           const UreCoefficients& coeffs) {
  double r_pos = coeffs.c_u_pos * terms.e_u_phi + coeffs.c_t_pos * terms.e_t_phi;
  double r_neg = coeffs.c_u_neg * terms.e_u_psi + coeffs.c_t_neg * terms.e_t_psi;
  return {r_pos, r_neg};
}

}  // namespace

StratifiedRisk stratified_risk(const model::Scorer& scorer, const TupleDataset& tuples,
                               const UnlabeledPool& pool, const TrainingPlan& plan,
                               const LossSpec& loss, ClampKind clamp_kind,
                               ClampGrouping grouping) {
  check_datasets(tuples, pool);
  if (plan.strata.empty()) throw std::invalid_argument("training plan has no strata");

  double pool_phi = 0.0, pool_psi = 0.0;
  for (const auto& inst : pool.samples) {
    double s = scorer.score(inst.features);
    pool_phi += pos_loss(loss, s);
    pool_psi += neg_loss(loss, s);
  }
  double n_u = static_cast<double>(pool.samples.size());
  pool_phi /= n_u;
  pool_psi /= n_u;

  StratifiedRisk result;
  for (const auto& stratum : plan.strata) {
    RiskComponents rc;
    rc.clamp_kind = clamp_kind;
    double gap = std::abs(plan.pi_hat - stratum.alpha_bar);
    double w = stratum.agg_weight * stratum.margin_weight;
    if (gap >= kHardGapThreshold && w > 0.0) {
      MixConfig cfg;
      cfg.pi = plan.pi_hat;
      cfg.alpha = stratum.alpha_bar;
      cfg.min_gap_epsilon = plan.min_gap_epsilon;
      auto coeffs = ure_coefficients(cfg);
      double phi_acc = 0.0, psi_acc = 0.0;
      for (std::size_t t : stratum.tuple_indices) {
        for (const auto& inst : tuples.tuples[t].instances) {
          double s = scorer.score(inst.features);
          phi_acc += pos_loss(loss, s);
          psi_acc += neg_loss(loss, s);
        }
      }
      UreTerms terms;
      terms.e_t_phi = phi_acc / static_cast<double>(stratum.instance_count);
      terms.e_t_psi = psi_acc / static_cast<double>(stratum.instance_count);
      terms.e_u_phi = pool_phi;
      terms.e_u_psi = pool_psi;
      rc = combine_ure(terms, coeffs, clamp_kind);
      if (grouping == ClampGrouping::ByClass) {
        auto [r_pos, r_neg] = class_components(terms, coeffs);
        rc.total_clamped = apply_clamp(clamp_kind, r_pos) + apply_clamp(clamp_kind, r_neg);
      }
      result.total += w * rc.total_clamped;
    }
    result.per_stratum.push_back(rc);
  }
  return result;
}

std::vector<double> plan_gradient(const model::Scorer& scorer, const TupleDataset& tuples,
                                  const UnlabeledPool& pool, const TrainingPlan& plan,
                                  const LossSpec& loss, ClampKind clamp_kind,
                                  ClampGrouping grouping) {
  check_datasets(tuples, pool);
  if (plan.strata.empty()) throw std::invalid_argument("training plan has no strata");

  double pool_phi = 0.0, pool_psi = 0.0;
  double n_u = static_cast<double>(pool.samples.size());
  for (const auto& inst : pool.samples) {
    double s = scorer.score(inst.features);
    pool_phi += pos_loss(loss, s);
    pool_psi += neg_loss(loss, s);
  }
  pool_phi /= n_u;
  pool_psi /= n_u;

  std::vector<double> grad(scorer.param_count(), 0.0);

  // Pool instances appear in every stratum's objective; fold the
  // per-stratum multipliers together so the pool is walked once.
  double pool_pos_mult = 0.0, pool_neg_mult = 0.0;

  for (const auto& stratum : plan.strata) {
    double gap = std::abs(plan.pi_hat - stratum.alpha_bar);
    double w = stratum.agg_weight * stratum.margin_weight;
    if (gap < kHardGapThreshold || w <= 0.0) continue;

    MixConfig cfg;
    cfg.pi = plan.pi_hat;
    cfg.alpha = stratum.alpha_bar;
    cfg.min_gap_epsilon = plan.min_gap_epsilon;
    auto coeffs = ure_coefficients(cfg);

    UreTerms terms;
    double phi_acc = 0.0, psi_acc = 0.0;
    for (std::size_t t : stratum.tuple_indices) {
      for (const auto& inst : tuples.tuples[t].instances) {
        double s = scorer.score(inst.features);
        phi_acc += pos_loss(loss, s);
        psi_acc += neg_loss(loss, s);
      }
    }
    double n_s = static_cast<double>(stratum.instance_count);
    terms.e_t_phi = phi_acc / n_s;
    terms.e_t_psi = psi_acc / n_s;
    terms.e_u_phi = pool_phi;
    terms.e_u_psi = pool_psi;

    // Each of the four terms is gated by the clamp subgradient of
    // whichever component it was summed into.
    double gate_t_phi, gate_t_psi, gate_u_phi, gate_u_psi;
    if (grouping == ClampGrouping::ByClass) {
      auto [r_pos, r_neg] = class_components(terms, coeffs);
      double g_pos = clamp_subgradient(clamp_kind, r_pos);
      double g_neg = clamp_subgradient(clamp_kind, r_neg);
      gate_t_phi = gate_u_phi = g_pos;
      gate_t_psi = gate_u_psi = g_neg;
    } else {
      double r_tuple = coeffs.c_t_pos * terms.e_t_phi + coeffs.c_t_neg * terms.e_t_psi;
      double r_unlabeled = coeffs.c_u_pos * terms.e_u_phi + coeffs.c_u_neg * terms.e_u_psi;
      double g_t = clamp_subgradient(clamp_kind, r_tuple);
      double g_u = clamp_subgradient(clamp_kind, r_unlabeled);
      gate_t_phi = gate_t_psi = g_t;
      gate_u_phi = gate_u_psi = g_u;
    }

    for (std::size_t t : stratum.tuple_indices) {
      for (const auto& inst : tuples.tuples[t].instances) {
        double s = scorer.score(inst.features);
        double upstream = w *
                          (gate_t_phi * coeffs.c_t_pos * pos_loss_dscore(loss, s) +
                           gate_t_psi * coeffs.c_t_neg * neg_loss_dscore(loss, s)) / n_s;
        if (upstream != 0.0) scorer.accumulate_score_grad(inst.features, upstream, grad);
      }
    }
    pool_pos_mult += w * gate_u_phi * coeffs.c_u_pos;
    pool_neg_mult += w * gate_u_psi * coeffs.c_u_neg;
  }

  for (const auto& inst : pool.samples) {
    double s = scorer.score(inst.features);
    double upstream = (pool_pos_mult * pos_loss_dscore(loss, s) +
                       pool_neg_mult * neg_loss_dscore(loss, s)) / n_u;
    if (upstream != 0.0) scorer.accumulate_score_grad(inst.features, upstream, grad);
  }
  return grad;
}

PriorBiasBounds prior_bias_bound(double B, double pi, double pi_hat, double alpha) {
  if (B < 0.0) throw std::invalid_argument("loss bound B must be nonnegative");
  if (!(pi > 0.0 && pi < 1.0) || !(pi_hat > 0.0 && pi_hat < 1.0)) {
    throw std::invalid_argument("pi and pi_hat must lie strictly inside (0,1)");
  }
  PriorBiasBounds out;
  double delta = std::abs(pi_hat - pi);
  double lo = std::min(pi, pi_hat);
  double hi = std::max(pi, pi_hat);
  out.gamma = alpha < lo ? lo - alpha : (alpha > hi ? alpha - hi : 0.0);
  if (delta == 0.0) {
    return out;  // exact prior: zero bias whatever gamma is
  }
  if (out.gamma <= 0.0) {
    out.unbounded = true;
    out.risk_bias = std::numeric_limits<double>::infinity();
    out.excess_risk = std::numeric_limits<double>::infinity();
    return out;
  }
  out.risk_bias = 2.0 * B * delta / (out.gamma * out.gamma);
  out.excess_risk = 4.0 * B * delta / (out.gamma * out.gamma);
  return out;
}

BiasBound count_bias_bound(double B, double expected_abs_alpha_err, double eta_lower) {
  if (B < 0.0) throw std::invalid_argument("loss bound B must be nonnegative");
  if (expected_abs_alpha_err < 0.0) {
    throw std::invalid_argument("expected rate error must be nonnegative");
  }
  BiasBound out;
  if (expected_abs_alpha_err == 0.0) return out;
  if (eta_lower <= 0.0) {
    out.unbounded = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = 2.0 * B * expected_abs_alpha_err / (eta_lower * eta_lower);
  return out;
}

BiasBound count_bias_bound_sigma(double B, double sigma_alpha, double eta_lower) {
  return count_bias_bound(B, sigma_alpha, eta_lower);
}

}  // namespace ntmp::risk
