#include "ntmp/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "train_detail.hpp"

namespace ntmp::baselines {

namespace {

using model::detail::check_finite_params;
using model::detail::OptimizerState;
using model::detail::sample_distinct;

// Bag means are pushed off the exact endpoints before any log; the
// clip region is flat, so gradients from a saturated bag vanish.
constexpr double kBagMeanClip = 1e-7;

risk::MixConfig mix_from(const UuConfig& cfg) {
  if (!(cfg.prior_1 > 0.0 && cfg.prior_1 < 1.0) || !(cfg.prior_2 > 0.0 && cfg.prior_2 < 1.0)) {
    throw std::invalid_argument("pool priors must lie strictly inside (0,1)");
  }
  risk::MixConfig mix;
  mix.pi = cfg.prior_1;
  mix.alpha = cfg.prior_2;
  return mix;
}

void mean_losses(const model::Scorer& scorer, const std::vector<InstanceSample>& pool,
                 const LossSpec& loss, double& phi_out, double& psi_out) {
  double phi_acc = 0.0, psi_acc = 0.0;
  for (const auto& inst : pool) {
    double s = scorer.score(inst.features);
    phi_acc += pos_loss(loss, s);
    psi_acc += neg_loss(loss, s);
  }
  phi_out = phi_acc / static_cast<double>(pool.size());
  psi_out = psi_acc / static_cast<double>(pool.size());
}

void validate_trainer_config(const model::TrainConfig& tcfg) {
  if (tcfg.epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (!(tcfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (tcfg.weight_decay < 0.0) throw std::invalid_argument("weight_decay must be nonnegative");
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// Leading eigenvector of the sample covariance by power iteration.
// The sign is fixed so the largest-magnitude coordinate is positive,
// which keeps the tie-break below independent of the start vector.
std::vector<double> principal_direction(const std::vector<InstanceSample>& xs) {
  std::size_t d = xs[0].features.size();
  std::size_t n = xs.size();
  std::vector<double> mean(d, 0.0);
  for (const auto& s : xs) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += s.features[i];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> cov(d * d, 0.0);
  for (const auto& s : xs) {
    for (std::size_t i = 0; i < d; ++i) {
      double di = s.features[i] - mean[i];
      for (std::size_t j = 0; j < d; ++j) {
        cov[i * d + j] += di * (s.features[j] - mean[j]);
      }
    }
  }
  for (double& c : cov) c /= static_cast<double>(n);

  std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  std::vector<double> w(d);
  for (int iter = 0; iter < 200; ++iter) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += cov[i * d + j] * v[j];
      w[i] = acc;
    }
    double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
    if (norm < 1e-300) break;  // isotropic to machine precision, keep v
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / norm;
  }
  std::size_t top = 0;
  for (std::size_t i = 1; i < d; ++i) {
    if (std::abs(v[i]) > std::abs(v[top])) top = i;
  }
  if (v[top] < 0.0) {
    for (double& x : v) x = -x;
  }
  return v;
}

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

double kl_bernoulli(double a, double b) {
  return xlogy(a, a / b) + xlogy(1.0 - a, (1.0 - a) / (1.0 - b));
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Entropy of Bernoulli(sigmoid(s)) evaluated from the clipped score.
double instance_entropy(double clipped) {
  double p = sigmoid(clipped);
  return p * softplus(-clipped) + (1.0 - p) * softplus(clipped);
}

double llp_data_term(LlpKind kind, double p_bar, double alpha) {
  if (kind == LlpKind::BagCe) {
    return -(xlogy(alpha, p_bar) + xlogy(1.0 - alpha, 1.0 - p_bar));
  }
  return js_bernoulli(p_bar, alpha);
}

// Derivative of the data term in the bag mean, zero where the mean
// clip saturates.
double llp_data_dp(LlpKind kind, double p_bar_raw, double p_bar, double alpha) {
  if (p_bar_raw < kBagMeanClip || p_bar_raw > 1.0 - kBagMeanClip) return 0.0;
  if (kind == LlpKind::BagCe) {
    return -alpha / p_bar + (1.0 - alpha) / (1.0 - p_bar);
  }
  double mid = 0.5 * (p_bar + alpha);
  return 0.5 * std::log(p_bar * (1.0 - mid) / (mid * (1.0 - p_bar)));
}

double llp_loss_impl(const model::Scorer& scorer, const TupleDataset& tuples,
                     const LlpConfig& cfg, LlpKind kind) {
  if (tuples.tuples.empty()) throw std::invalid_argument("tuple dataset is empty");
  if (cfg.entropy_weight < 0.0) throw std::invalid_argument("entropy_weight must be nonnegative");
  double data_acc = 0.0, ent_acc = 0.0;
  std::size_t n_inst = 0;
  for (const auto& tup : tuples.tuples) {
    double p_sum = 0.0;
    for (const auto& inst : tup.instances) {
      double sc = clip_score(scorer.score(inst.features));
      p_sum += sigmoid(sc);
      ent_acc += instance_entropy(sc);
      ++n_inst;
    }
    double p_bar = std::clamp(p_sum / static_cast<double>(tup.instances.size()), kBagMeanClip,
                              1.0 - kBagMeanClip);
    data_acc += llp_data_term(kind, p_bar, tup.alpha());
  }
  return data_acc / static_cast<double>(tuples.tuples.size()) +
         cfg.entropy_weight * ent_acc / static_cast<double>(n_inst);
}

}  // namespace

risk::RiskComponents uu_risk(const model::Scorer& scorer,
                             const std::vector<InstanceSample>& pool_1,
                             const std::vector<InstanceSample>& pool_2, const UuConfig& cfg,
                             const LossSpec& loss) {
  if (pool_1.empty() || pool_2.empty()) {
    throw std::invalid_argument("both unlabeled pools must be nonempty");
  }
  auto coeffs = risk::ure_coefficients(mix_from(cfg));
  risk::UreTerms terms;
  mean_losses(scorer, pool_1, loss, terms.e_u_phi, terms.e_u_psi);
  mean_losses(scorer, pool_2, loss, terms.e_t_phi, terms.e_t_psi);
  return risk::combine_ure(terms, coeffs, cfg.clamp_kind);
}

BaselineFit train_uu(const std::vector<InstanceSample>& pool_1,
                     const std::vector<InstanceSample>& pool_2, const UuConfig& cfg,
                     const LossSpec& loss, const model::TrainConfig& tcfg,
                     std::size_t batch_instances) {
  if (pool_1.empty() || pool_2.empty()) {
    throw std::invalid_argument("both unlabeled pools must be nonempty");
  }
  if (batch_instances < 1) throw std::invalid_argument("batch_instances must be at least 1");
  validate_trainer_config(tcfg);
  auto coeffs = risk::ure_coefficients(mix_from(cfg));

  std::size_t b1 = std::min(batch_instances, pool_1.size());
  std::size_t b2 = std::min(batch_instances, pool_2.size());
  std::size_t steps_per_epoch =
      std::max<std::size_t>(1, std::max(pool_1.size(), pool_2.size()) / batch_instances);

  Rng init_rng(derive_seed(tcfg.seed, 0));
  Rng batch_rng(derive_seed(tcfg.seed, 1));
  BaselineFit fit{model::Scorer::make(tcfg.scorer, init_rng), {}};
  OptimizerState opt(tcfg.optimizer, fit.scorer.param_count(), tcfg.learning_rate,
                     tcfg.weight_decay);

  std::vector<std::size_t> scratch_1(pool_1.size()), scratch_2(pool_2.size());
  std::iota(scratch_1.begin(), scratch_1.end(), 0);
  std::iota(scratch_2.begin(), scratch_2.end(), 0);
  std::vector<double> grad(fit.scorer.param_count());
  std::vector<double> s1(b1), s2(b2);

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      auto idx_1 = sample_distinct(scratch_1, b1, batch_rng);
      auto idx_2 = sample_distinct(scratch_2, b2, batch_rng);
      double ephi_u = 0.0, epsi_u = 0.0, ephi_t = 0.0, epsi_t = 0.0;
      for (std::size_t k = 0; k < b1; ++k) {
        s1[k] = fit.scorer.score(pool_1[idx_1[k]].features);
        ephi_u += pos_loss(loss, s1[k]);
        epsi_u += neg_loss(loss, s1[k]);
      }
      for (std::size_t k = 0; k < b2; ++k) {
        s2[k] = fit.scorer.score(pool_2[idx_2[k]].features);
        ephi_t += pos_loss(loss, s2[k]);
        epsi_t += neg_loss(loss, s2[k]);
      }
      ephi_u /= static_cast<double>(b1);
      epsi_u /= static_cast<double>(b1);
      ephi_t /= static_cast<double>(b2);
      epsi_t /= static_cast<double>(b2);
      double r_u = coeffs.c_u_pos * ephi_u + coeffs.c_u_neg * epsi_u;
      double r_t = coeffs.c_t_pos * ephi_t + coeffs.c_t_neg * epsi_t;
      double g_u = clamp_subgradient(cfg.clamp_kind, r_u) / static_cast<double>(b1);
      double g_t = clamp_subgradient(cfg.clamp_kind, r_t) / static_cast<double>(b2);

      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = 0; k < b1; ++k) {
        double up = g_u * (coeffs.c_u_pos * pos_loss_dscore(loss, s1[k]) +
                           coeffs.c_u_neg * neg_loss_dscore(loss, s1[k]));
        if (up != 0.0) fit.scorer.accumulate_score_grad(pool_1[idx_1[k]].features, up, grad);
      }
      for (std::size_t k = 0; k < b2; ++k) {
        double up = g_t * (coeffs.c_t_pos * pos_loss_dscore(loss, s2[k]) +
                           coeffs.c_t_neg * neg_loss_dscore(loss, s2[k]));
        if (up != 0.0) fit.scorer.accumulate_score_grad(pool_2[idx_2[k]].features, up, grad);
      }
      opt.step(fit.scorer.params(), grad);
      check_finite_params(fit.scorer, epoch);
    }
    auto rc = uu_risk(fit.scorer, pool_1, pool_2, cfg, loss);
    if (!std::isfinite(rc.total_unclamped)) {
      throw std::runtime_error("training diverged: non-finite risk at epoch " +
                               std::to_string(epoch));
    }
    model::TraceRow row;
    row.epoch = epoch;
    row.risk_unclamped = rc.total_unclamped;
    row.risk_clamped = rc.total_clamped;
    fit.trace.push_back(row);
  }
  return fit;
}

KmeansModel kmeans_prior_matched(const UnlabeledPool& pool, KmInit init, double declared_prior,
                                 RngSeed seed) {
  const auto& xs = pool.samples;
  if (xs.size() < 2) throw std::invalid_argument("clustering needs at least two samples");
  if (!(declared_prior > 0.0 && declared_prior < 1.0)) {
    throw std::invalid_argument("declared_prior must lie strictly inside (0,1)");
  }
  bool any_distinct = false;
  for (std::size_t k = 1; k < xs.size() && !any_distinct; ++k) {
    any_distinct = xs[k].features != xs[0].features;
  }
  if (!any_distinct) {
    throw std::invalid_argument("clustering needs at least two distinct points");
  }

  Rng rng(derive_seed(seed, 0));
  std::array<std::vector<double>, 2> c;
  if (init == KmInit::Forgy) {
    c[0] = xs[rng.index(xs.size())].features;
    std::size_t j;
    do {
      j = rng.index(xs.size());
    } while (xs[j].features == c[0]);
    c[1] = xs[j].features;
  } else {
    c[0] = xs[rng.index(xs.size())].features;
    std::vector<double> d2(xs.size());
    double total = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      d2[k] = sq_dist(xs[k].features, c[0]);
      total += d2[k];
    }
    double u = rng.uniform01() * total;
    std::size_t pick = xs.size();
    double acc = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      acc += d2[k];
      if (u < acc) {
        pick = k;
        break;
      }
    }
    if (pick == xs.size()) {  // u landed on the rounding tail
      for (std::size_t k = xs.size(); k-- > 0;) {
        if (d2[k] > 0.0) {
          pick = k;
          break;
        }
      }
    }
    c[1] = xs[pick].features;
  }

  std::vector<int> assign(xs.size(), 0);
  auto assign_all = [&]() {
    for (std::size_t k = 0; k < xs.size(); ++k) {
      assign[k] = sq_dist(xs[k].features, c[0]) <= sq_dist(xs[k].features, c[1]) ? 0 : 1;
    }
  };

  std::size_t d = xs[0].features.size();
  std::size_t iterations = 0;
  bool converged = false;
  while (iterations < 300) {
    ++iterations;
    assign_all();
    std::array<std::vector<double>, 2> sums = {std::vector<double>(d, 0.0),
                                               std::vector<double>(d, 0.0)};
    std::array<std::size_t, 2> counts = {0, 0};
    for (std::size_t k = 0; k < xs.size(); ++k) {
      auto& acc = sums[static_cast<std::size_t>(assign[k])];
      for (std::size_t i = 0; i < d; ++i) acc[i] += xs[k].features[i];
      ++counts[static_cast<std::size_t>(assign[k])];
    }
    for (int cl = 0; cl < 2; ++cl) {
      auto ucl = static_cast<std::size_t>(cl);
      if (counts[ucl] == 0) {
        // Reseat an emptied centroid on the point farthest from its
        // current assignment; the sibling mean absorbs the loss next
        // round.
        std::size_t far = 0;
        double best = -1.0;
        for (std::size_t k = 0; k < xs.size(); ++k) {
          double dist = sq_dist(xs[k].features, c[static_cast<std::size_t>(assign[k])]);
          if (dist > best) {
            best = dist;
            far = k;
          }
        }
        sums[ucl] = xs[far].features;
        counts[ucl] = 1;
      } else {
        for (double& v : sums[ucl]) v /= static_cast<double>(counts[ucl]);
      }
    }
    double shift = std::sqrt(std::max(sq_dist(c[0], sums[0]), sq_dist(c[1], sums[1])));
    c = sums;
    if (shift < 1e-8) {
      converged = true;
      break;
    }
  }
  assign_all();

  std::size_t n_0 = 0;
  for (int a : assign) n_0 += a == 0;
  // Counts are compared against prior * n rather than fractions
  // against the prior: the former detects equidistant splits exactly,
  // the latter breaks ties on division rounding.
  double target = declared_prior * static_cast<double>(xs.size());
  double gap_0 = std::abs(static_cast<double>(n_0) - target);
  double gap_1 = std::abs(static_cast<double>(xs.size() - n_0) - target);
  int pos_cluster;
  if (gap_0 != gap_1) {
    pos_cluster = gap_0 < gap_1 ? 0 : 1;
  } else {
    // Size gaps tie exactly on a 50/50 split and whenever the declared
    // prior is one half; break along the first principal direction of
    // the data.
    auto dir = principal_direction(xs);
    double proj_0 = std::inner_product(c[0].begin(), c[0].end(), dir.begin(), 0.0);
    double proj_1 = std::inner_product(c[1].begin(), c[1].end(), dir.begin(), 0.0);
    pos_cluster = proj_0 >= proj_1 ? 0 : 1;
  }

  KmeansModel model;
  model.centroid_pos = c[static_cast<std::size_t>(pos_cluster)];
  model.centroid_neg = c[static_cast<std::size_t>(1 - pos_cluster)];
  model.labels.resize(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    model.labels[k] = assign[k] == pos_cluster ? 1 : -1;
  }
  model.iterations = iterations;
  model.converged = converged;
  return model;
}

int km_predict(const KmeansModel& model, const std::vector<double>& x) {
  return sq_dist(x, model.centroid_pos) <= sq_dist(x, model.centroid_neg) ? 1 : -1;
}

std::vector<int> km_predict_batch(const KmeansModel& model,
                                  const std::vector<InstanceSample>& xs) {
  std::vector<int> out;
  out.reserve(xs.size());
  for (const auto& s : xs) out.push_back(km_predict(model, s.features));
  return out;
}

BaselineFit cluster_then_classify(const UnlabeledPool& pool, KmInit init, double declared_prior,
                                  const model::TrainConfig& tcfg) {
  // Streams 0 and 1 belong to the supervised stage; the clustering
  // stage gets its own.
  auto km = kmeans_prior_matched(pool, init, declared_prior, derive_seed(tcfg.seed, 2));
  std::vector<InstanceSample> labeled = pool.samples;
  for (std::size_t k = 0; k < labeled.size(); ++k) labeled[k].label = km.labels[k];
  auto result = model::train_supervised(labeled, LossSpec::logistic(), tcfg);
  return {std::move(result.scorer), std::move(result.trace)};
}

double js_bernoulli(double p, double q) {
  if (!(p >= 0.0 && p <= 1.0) || !(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("js_bernoulli needs probabilities in [0,1]");
  }
  double mid = 0.5 * (p + q);
  return 0.5 * (kl_bernoulli(p, mid) + kl_bernoulli(q, mid));
}

double llp_bagce_loss(const model::Scorer& scorer, const TupleDataset& tuples,
                      const LlpConfig& cfg) {
  return llp_loss_impl(scorer, tuples, cfg, LlpKind::BagCe);
}

double llp_js_loss(const model::Scorer& scorer, const TupleDataset& tuples,
                   const LlpConfig& cfg) {
  return llp_loss_impl(scorer, tuples, cfg, LlpKind::Js);
}

BaselineFit train_llp(const TupleDataset& tuples, LlpKind kind, const LlpConfig& cfg,
                      const model::TrainConfig& tcfg) {
  if (tuples.tuples.empty()) throw std::invalid_argument("tuple dataset is empty");
  if (cfg.entropy_weight < 0.0) throw std::invalid_argument("entropy_weight must be nonnegative");
  if (tcfg.batch_tuples < 1) throw std::invalid_argument("batch_tuples must be at least 1");
  if (static_cast<std::size_t>(tcfg.batch_tuples) > tuples.tuples.size()) {
    throw std::invalid_argument("batch_tuples exceeds the number of tuples");
  }
  validate_trainer_config(tcfg);

  auto batch = static_cast<std::size_t>(tcfg.batch_tuples);
  std::size_t steps_per_epoch = std::max<std::size_t>(1, tuples.tuples.size() / batch);

  Rng init_rng(derive_seed(tcfg.seed, 0));
  Rng batch_rng(derive_seed(tcfg.seed, 1));
  BaselineFit fit{model::Scorer::make(tcfg.scorer, init_rng), {}};
  OptimizerState opt(tcfg.optimizer, fit.scorer.param_count(), tcfg.learning_rate,
                     tcfg.weight_decay);

  std::vector<std::size_t> scratch(tuples.tuples.size());
  std::iota(scratch.begin(), scratch.end(), 0);
  std::vector<double> grad(fit.scorer.param_count());
  std::vector<double> raw_scores;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      auto idx = sample_distinct(scratch, batch, batch_rng);
      std::size_t n_inst_batch = 0;
      for (std::size_t t : idx) n_inst_batch += tuples.tuples[t].instances.size();
      double ent_scale = cfg.entropy_weight / static_cast<double>(n_inst_batch);

      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t t : idx) {
        const auto& tup = tuples.tuples[t];
        auto n_t = static_cast<double>(tup.instances.size());
        raw_scores.resize(tup.instances.size());
        double p_sum = 0.0;
        for (std::size_t j = 0; j < tup.instances.size(); ++j) {
          raw_scores[j] = fit.scorer.score(tup.instances[j].features);
          p_sum += sigmoid(clip_score(raw_scores[j]));
        }
        double p_bar_raw = p_sum / n_t;
        double p_bar = std::clamp(p_bar_raw, kBagMeanClip, 1.0 - kBagMeanClip);
        double dldp = llp_data_dp(kind, p_bar_raw, p_bar, tup.alpha());
        double bag_scale = dldp / (n_t * static_cast<double>(batch));
        for (std::size_t j = 0; j < tup.instances.size(); ++j) {
          double raw = raw_scores[j];
          if (raw <= -kScoreClip || raw >= kScoreClip) continue;
          double p = sigmoid(raw);
          double up = p * (1.0 - p) * (bag_scale - ent_scale * raw);
          if (up != 0.0) fit.scorer.accumulate_score_grad(tup.instances[j].features, up, grad);
        }
      }
      opt.step(fit.scorer.params(), grad);
      check_finite_params(fit.scorer, epoch);
    }
    double loss = llp_loss_impl(fit.scorer, tuples, cfg, kind);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("training diverged: non-finite risk at epoch " +
                               std::to_string(epoch));
    }
    model::TraceRow row;
    row.epoch = epoch;
    row.risk_unclamped = loss;
    row.risk_clamped = loss;
    fit.trace.push_back(row);
  }
  return fit;
}

}  // namespace ntmp::baselines
