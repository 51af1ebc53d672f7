#include "ntmp/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ntmp/baselines.hpp"
#include "ntmp/model.hpp"
#include "ntmp/risk.hpp"

namespace ntmp::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing. Every key is type-checked and unknown keys are
// rejected, so a typo fails loudly instead of silently running the
// default experiment.

[[noreturn]] void config_error(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

const json* find_key(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) config_error("unknown key \"" + it.key() + "\" in " + where);
  }
}

const json& require_object(const json& obj, const char* key) {
  const json* v = find_key(obj, key);
  if (v == nullptr) config_error(std::string("missing section \"") + key + "\"");
  if (!v->is_object()) config_error(std::string("\"") + key + "\" must be an object");
  return *v;
}

double get_double(const json& obj, const char* key, double fallback) {
  const json* v = find_key(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_number()) config_error(std::string("\"") + key + "\" must be a number");
  return v->get<double>();
}

std::size_t get_size(const json& obj, const char* key, std::size_t fallback) {
  const json* v = find_key(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer() && !v->is_number_unsigned())
    config_error(std::string("\"") + key + "\" must be a nonnegative integer");
  if (v->is_number_integer() && v->get<std::int64_t>() < 0)
    config_error(std::string("\"") + key + "\" must be a nonnegative integer");
  return v->get<std::size_t>();
}

int get_int(const json& obj, const char* key, int fallback) {
  const json* v = find_key(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer() && !v->is_number_unsigned())
    config_error(std::string("\"") + key + "\" must be an integer");
  return v->get<int>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
  const json* v = find_key(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) config_error(std::string("\"") + key + "\" must be a string");
  return v->get<std::string>();
}

std::vector<double> get_double_list(const json& obj, const char* key,
                                    std::vector<double> fallback) {
  const json* v = find_key(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_array()) config_error(std::string("\"") + key + "\" must be an array of numbers");
  std::vector<double> out;
  out.reserve(v->size());
  for (const json& e : *v) {
    if (!e.is_number()) config_error(std::string("\"") + key + "\" must be an array of numbers");
    double x = e.get<double>();
    if (!std::isfinite(x)) config_error(std::string("\"") + key + "\" entries must be finite");
    out.push_back(x);
  }
  return out;
}

struct MethodEntry {
  Method method;
  const char* name;
};

constexpr MethodEntry kMethodTable[] = {
    {Method::NtmpUre, "ntmp-ure"}, {Method::NtmpAbs, "ntmp-abs"}, {Method::NtmpRelu, "ntmp-relu"},
    {Method::Uu, "uu"},            {Method::UuCor, "uucor"},      {Method::Km, "km"},
    {Method::KmPlusPlus, "km++"},  {Method::LlpBagce, "llp-bagce"}, {Method::LlpJs, "llp-js"},
};

PriorRegime parse_regime(const std::string& s) {
  if (s == "known") return PriorRegime::Known;
  if (s == "estimated") return PriorRegime::Estimated;
  config_error("prior_regime must be \"known\" or \"estimated\", got \"" + s + "\"");
}

LossSpec parse_loss(const std::string& s) {
  if (s == "logistic") return LossSpec::logistic();
  if (s == "sigmoid") return LossSpec::sigmoid();
  if (s == "squared_hinge") return LossSpec::squared_hinge();
  config_error("loss must be \"logistic\", \"sigmoid\", or \"squared_hinge\", got \"" + s + "\"");
}

std::string loss_name(const LossSpec& loss) {
  switch (loss.kind) {
    case LossKind::Logistic: return "logistic";
    case LossKind::Sigmoid: return "sigmoid";
    case LossKind::SquaredHinge: return "squared_hinge";
  }
  return "logistic";
}

model::Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return model::Optimizer::Adam;
  if (s == "sgd") return model::Optimizer::Sgd;
  config_error("optimizer must be \"adam\" or \"sgd\", got \"" + s + "\"");
}

model::PlanMode parse_plan(const std::string& s) {
  if (s == "auto") return model::PlanMode::Auto;
  if (s == "pooled") return model::PlanMode::Pooled;
  if (s == "stratify_by_alpha") return model::PlanMode::StratifyByAlpha;
  config_error("plan must be \"auto\", \"pooled\", or \"stratify_by_alpha\", got \"" + s + "\"");
}

const char* plan_name(model::PlanMode p) {
  switch (p) {
    case model::PlanMode::Auto: return "auto";
    case model::PlanMode::Pooled: return "pooled";
    case model::PlanMode::StratifyByAlpha: return "stratify_by_alpha";
  }
  return "auto";
}

risk::ClampGrouping parse_grouping(const std::string& s) {
  if (s == "by_class") return risk::ClampGrouping::ByClass;
  if (s == "by_source") return risk::ClampGrouping::BySource;
  config_error("clamp_grouping must be \"by_class\" or \"by_source\", got \"" + s + "\"");
}

datagen::Replacement parse_replacement(const std::string& s) {
  if (s == "without") return datagen::Replacement::WithoutReplacement;
  if (s == "with") return datagen::Replacement::WithReplacement;
  config_error("replacement must be \"without\" or \"with\", got \"" + s + "\"");
}

prior::SweepMetric parse_sweep_metric(const std::string& s) {
  if (s == "ap") return prior::SweepMetric::AveragePrecision;
  if (s == "macro_f1") return prior::SweepMetric::MacroF1;
  config_error("sweep metric must be \"ap\" or \"macro_f1\", got \"" + s + "\"");
}

TaskSpec parse_task(const json& j) {
  TaskSpec task;
  check_keys(j, "task",
             {"kind", "dim", "prior", "mean_pos", "mean_neg", "cov_scale", "labeled_csv",
              "unlabeled_csv", "source_samples", "unlabeled_samples", "audit_samples",
              "proxy_samples"});
  std::string kind = get_string(j, "kind", "gaussian");
  if (kind == "gaussian") {
    task.gaussian = true;
  } else if (kind == "csv") {
    task.gaussian = false;
  } else {
    config_error("task.kind must be \"gaussian\" or \"csv\", got \"" + kind + "\"");
  }

  if (task.gaussian) {
    if (find_key(j, "labeled_csv") != nullptr || find_key(j, "unlabeled_csv") != nullptr)
      config_error("csv paths only apply to csv tasks");
    auto& g = task.gauss;
    g.dim = get_int(j, "dim", 2);
    if (g.dim < 1) config_error("task.dim must be at least 1");
    g.prior_pi = get_double(j, "prior", 0.5);
    if (!(g.prior_pi > 0.0 && g.prior_pi < 1.0))
      config_error("task.prior must lie strictly between 0 and 1");
    g.cov_scale = get_double(j, "cov_scale", 1.0);
    if (!(g.cov_scale > 0.0)) config_error("task.cov_scale must be positive");
    g.mean_pos = get_double_list(j, "mean_pos", {});
    g.mean_neg = get_double_list(j, "mean_neg", {});
    std::size_t d = static_cast<std::size_t>(g.dim);
    if (g.mean_pos.empty()) g.mean_pos.assign(d, 1.0);
    if (g.mean_neg.empty()) g.mean_neg.assign(d, -1.0);
    if (g.mean_pos.size() != d) config_error("task.mean_pos must have dim entries");
    if (g.mean_neg.size() != d) config_error("task.mean_neg must have dim entries");
  } else {
    if (find_key(j, "dim") != nullptr || find_key(j, "mean_pos") != nullptr ||
        find_key(j, "mean_neg") != nullptr || find_key(j, "cov_scale") != nullptr)
      config_error("gaussian keys only apply to gaussian tasks");
    std::string labeled = get_string(j, "labeled_csv", "");
    if (labeled.empty()) config_error("csv task needs labeled_csv");
    task.labeled_csv = labeled;
    task.unlabeled_csv = get_string(j, "unlabeled_csv", "");
    task.declared_prior = get_double(j, "prior", 0.5);
    if (!(task.declared_prior > 0.0 && task.declared_prior < 1.0))
      config_error("task.prior must lie strictly between 0 and 1");
  }

  task.source_samples = get_size(j, "source_samples", task.source_samples);
  task.unlabeled_samples = get_size(j, "unlabeled_samples", task.unlabeled_samples);
  task.audit_samples = get_size(j, "audit_samples", task.audit_samples);
  task.proxy_samples = get_size(j, "proxy_samples", task.proxy_samples);
  if (task.source_samples < 1) config_error("task.source_samples must be at least 1");
  if (task.unlabeled_samples < 1) config_error("task.unlabeled_samples must be at least 1");
  if (task.audit_samples < 2)
    config_error("task.audit_samples must be at least 2 (half calibrates, half tests)");
  if (task.proxy_samples < 1) config_error("task.proxy_samples must be at least 1");
  return task;
}

datagen::TupleBuildSpec parse_tuples(const json& j) {
  datagen::TupleBuildSpec spec;
  check_keys(j, "tuples", {"n", "m", "count", "replacement", "variable_nm"});
  spec.n = get_int(j, "n", spec.n);
  spec.m = get_int(j, "m", spec.m);
  if (spec.n < 1) config_error("tuples.n must be at least 1");
  if (spec.m < 0) config_error("tuples.m must be nonnegative");
  spec.n_tuples = get_size(j, "count", 0);
  if (spec.n_tuples < 1) config_error("tuples.count must be at least 1");
  spec.replacement = parse_replacement(get_string(j, "replacement", "without"));
  if (const json* v = find_key(j, "variable_nm")) {
    if (!v->is_array() || v->empty())
      config_error("tuples.variable_nm must be a nonempty array of {n, m, weight} objects");
    std::vector<datagen::TupleConfigWeight> mix;
    for (const json& e : *v) {
      if (!e.is_object()) config_error("tuples.variable_nm entries must be objects");
      check_keys(e, "tuples.variable_nm", {"n", "m", "weight"});
      datagen::TupleConfigWeight w;
      w.n = get_int(e, "n", 0);
      w.m = get_int(e, "m", 0);
      w.weight = get_double(e, "weight", 0.0);
      if (w.n < 1) config_error("tuples.variable_nm entries need n >= 1");
      if (w.m < 0) config_error("tuples.variable_nm entries need m >= 0");
      if (!(w.weight > 0.0)) config_error("tuples.variable_nm weights must be positive");
      mix.push_back(w);
    }
    spec.variable_nm = std::move(mix);
  }
  return spec;
}

void parse_train(const json& j, ExperimentConfig& cfg) {
  check_keys(j, "train",
             {"scorer", "hidden_width", "activation", "epochs", "batch_tuples", "batch_unlabeled",
              "optimizer", "learning_rate", "clamp_grouping", "margin_epsilon", "weight_decay",
              "plan", "stratify_tau", "entropy_weight"});
  auto& t = cfg.train;
  t.scorer.kind = model::scorer_kind_from_name(get_string(j, "scorer", "linear"));
  t.scorer.hidden_width = get_size(j, "hidden_width", t.scorer.hidden_width);
  t.scorer.activation = model::activation_from_name(get_string(j, "activation", "relu"));
  t.epochs = get_int(j, "epochs", 40);
  if (t.epochs < 0) config_error("train.epochs must be nonnegative");
  t.batch_tuples = get_size(j, "batch_tuples", t.batch_tuples);
  if (t.batch_tuples < 1) config_error("train.batch_tuples must be at least 1");
  t.batch_unlabeled = get_size(j, "batch_unlabeled", t.batch_unlabeled);
  t.optimizer = parse_optimizer(get_string(j, "optimizer", "adam"));
  t.learning_rate = get_double(j, "learning_rate", 1e-3);
  if (!(t.learning_rate > 0.0)) config_error("train.learning_rate must be positive");
  t.clamp_grouping = parse_grouping(get_string(j, "clamp_grouping", "by_class"));
  t.margin_epsilon = get_double(j, "margin_epsilon", t.margin_epsilon);
  if (t.margin_epsilon < 0.0) config_error("train.margin_epsilon must be nonnegative");
  t.weight_decay = get_double(j, "weight_decay", 0.0);
  if (t.weight_decay < 0.0) config_error("train.weight_decay must be nonnegative");
  t.plan_mode = parse_plan(get_string(j, "plan", "auto"));
  t.stratify_tau = get_double(j, "stratify_tau", t.stratify_tau);
  if (t.stratify_tau < 0.0) config_error("train.stratify_tau must be nonnegative");
  cfg.llp_entropy_weight = get_double(j, "entropy_weight", cfg.llp_entropy_weight);
  if (cfg.llp_entropy_weight < 0.0) config_error("train.entropy_weight must be nonnegative");
}

SweepSpec parse_sweep(const json& j) {
  SweepSpec s;
  check_keys(j, "sweep", {"deltas", "bootstrap_b", "metric", "epsilon", "w_star"});
  s.deltas = get_double_list(j, "deltas", {});
  for (double d : s.deltas) {
    if (!(d > -1.0 && d < 1.0)) config_error("sweep.deltas entries must lie in (-1, 1)");
  }
  s.bootstrap_b = get_size(j, "bootstrap_b", s.bootstrap_b);
  if (s.bootstrap_b < 1) config_error("sweep.bootstrap_b must be at least 1");
  s.metric = parse_sweep_metric(get_string(j, "metric", "ap"));
  s.epsilon = get_double(j, "epsilon", s.epsilon);
  if (!(s.epsilon > 0.0)) config_error("sweep.epsilon must be positive");
  s.w_star = get_double(j, "w_star", s.w_star);
  if (!(s.w_star > 0.0)) config_error("sweep.w_star must be positive");
  return s;
}

PerturbSpec parse_perturb(const json& j) {
  PerturbSpec p;
  check_keys(j, "perturb", {"prior_noise_frac", "flip_probs", "band_deltas"});
  p.prior_noise_frac = get_double(j, "prior_noise_frac", p.prior_noise_frac);
  if (!(p.prior_noise_frac >= 0.0 && p.prior_noise_frac < 1.0))
    config_error("perturb.prior_noise_frac must lie in [0, 1)");
  p.flip_probs = get_double_list(j, "flip_probs", p.flip_probs);
  if (p.flip_probs.empty()) config_error("perturb.flip_probs must not be empty");
  for (double q : p.flip_probs) {
    if (!(q >= 0.0 && q <= 1.0)) config_error("perturb.flip_probs entries must lie in [0, 1]");
  }
  p.band_deltas = get_double_list(j, "band_deltas", p.band_deltas);
  if (p.band_deltas.empty()) config_error("perturb.band_deltas must not be empty");
  return p;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) config_error("top level must be an object");
  check_keys(j, "top level",
             {"task", "tuples", "prior_regime", "methods", "loss", "train", "sweep", "perturb",
              "seeds", "base_seed", "out_dir", "workers"});

  ExperimentConfig cfg;
  if (const json* t = find_key(j, "task")) {
    if (!t->is_object()) config_error("\"task\" must be an object");
    cfg.task = parse_task(*t);
  } else {
    // Run the task parser anyway so an omitted section gets the same
    // derived defaults (gaussian means at +-1) an empty one would.
    cfg.task = parse_task(json::object());
  }
  cfg.tuples = parse_tuples(require_object(j, "tuples"));
  cfg.prior_regime = parse_regime(get_string(j, "prior_regime", "known"));

  const json* methods = find_key(j, "methods");
  if (methods == nullptr || !methods->is_array() || methods->empty())
    config_error("\"methods\" must be a nonempty array of method names");
  for (const json& e : *methods) {
    if (!e.is_string()) config_error("\"methods\" entries must be strings");
    cfg.methods.push_back(method_from_name(e.get<std::string>()));
  }

  cfg.loss = parse_loss(get_string(j, "loss", "logistic"));
  if (const json* t = find_key(j, "train")) {
    if (!t->is_object()) config_error("\"train\" must be an object");
    parse_train(*t, cfg);
  } else {
    cfg.train.epochs = 40;
    cfg.train.learning_rate = 1e-3;
  }
  if (const json* s = find_key(j, "sweep")) {
    if (!s->is_object()) config_error("\"sweep\" must be an object");
    cfg.sweep = parse_sweep(*s);
  }
  if (const json* p = find_key(j, "perturb")) {
    if (!p->is_object()) config_error("\"perturb\" must be an object");
    cfg.perturb = parse_perturb(*p);
  }

  cfg.seeds = get_size(j, "seeds", 1);
  if (cfg.seeds < 1) config_error("seeds must be at least 1");
  if (const json* b = find_key(j, "base_seed")) {
    if (!b->is_number_integer() && !b->is_number_unsigned())
      config_error("\"base_seed\" must be an integer");
    if (b->is_number_integer() && b->get<std::int64_t>() < 0)
      config_error("\"base_seed\" must be nonnegative");
    cfg.base_seed = RngSeed{b->get<std::uint64_t>()};
  }
  std::string out_dir = get_string(j, "out_dir", "");
  if (out_dir.empty()) config_error("\"out_dir\" is required");
  cfg.out_dir = out_dir;
  cfg.workers = get_size(j, "workers", 0);
  return cfg;
}

// ---------------------------------------------------------------------------
// Canonical serialization and provenance. The hash covers the full
// resolved experiment (defaults included), so two files that spell the
// same experiment differently still stamp the same provenance. Where
// the artifacts land (out_dir) and how the run parallelizes (workers)
// do not affect the results, so they stay out of the hash.

json task_to_json(const TaskSpec& t) {
  json j;
  j["kind"] = t.gaussian ? "gaussian" : "csv";
  if (t.gaussian) {
    j["dim"] = t.gauss.dim;
    j["prior"] = t.gauss.prior_pi;
    j["mean_pos"] = t.gauss.mean_pos;
    j["mean_neg"] = t.gauss.mean_neg;
    j["cov_scale"] = t.gauss.cov_scale;
  } else {
    j["labeled_csv"] = t.labeled_csv.string();
    j["unlabeled_csv"] = t.unlabeled_csv.string();
    j["prior"] = t.declared_prior;
  }
  j["source_samples"] = t.source_samples;
  j["unlabeled_samples"] = t.unlabeled_samples;
  j["audit_samples"] = t.audit_samples;
  j["proxy_samples"] = t.proxy_samples;
  return j;
}

json tuples_to_json(const datagen::TupleBuildSpec& s) {
  json j;
  j["n"] = s.n;
  j["m"] = s.m;
  j["count"] = s.n_tuples;
  j["replacement"] = s.replacement == datagen::Replacement::WithoutReplacement ? "without" : "with";
  if (s.variable_nm) {
    json mix = json::array();
    for (const auto& w : *s.variable_nm) {
      mix.push_back({{"n", w.n}, {"m", w.m}, {"weight", w.weight}});
    }
    j["variable_nm"] = mix;
  }
  return j;
}

json train_to_json(const ExperimentConfig& cfg) {
  const auto& t = cfg.train;
  json j;
  j["scorer"] = model::scorer_kind_name(t.scorer.kind);
  j["hidden_width"] = t.scorer.hidden_width;
  j["activation"] = model::activation_name(t.scorer.activation);
  j["epochs"] = t.epochs;
  j["batch_tuples"] = t.batch_tuples;
  j["batch_unlabeled"] = t.batch_unlabeled;
  j["optimizer"] = t.optimizer == model::Optimizer::Adam ? "adam" : "sgd";
  j["learning_rate"] = t.learning_rate;
  j["clamp_grouping"] =
      t.clamp_grouping == risk::ClampGrouping::ByClass ? "by_class" : "by_source";
  j["margin_epsilon"] = t.margin_epsilon;
  j["weight_decay"] = t.weight_decay;
  j["plan"] = plan_name(t.plan_mode);
  j["stratify_tau"] = t.stratify_tau;
  j["entropy_weight"] = cfg.llp_entropy_weight;
  return j;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["task"] = task_to_json(cfg.task);
  j["tuples"] = tuples_to_json(cfg.tuples);
  j["prior_regime"] = cfg.prior_regime == PriorRegime::Known ? "known" : "estimated";
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(method_name(m));
  j["methods"] = methods;
  j["loss"] = loss_name(cfg.loss);
  j["train"] = train_to_json(cfg);
  j["sweep"] = {{"deltas", cfg.sweep.deltas},
                {"bootstrap_b", cfg.sweep.bootstrap_b},
                {"metric", prior::sweep_metric_name(cfg.sweep.metric)},
                {"epsilon", cfg.sweep.epsilon},
                {"w_star", cfg.sweep.w_star}};
  j["perturb"] = {{"prior_noise_frac", cfg.perturb.prior_noise_frac},
                  {"flip_probs", cfg.perturb.flip_probs},
                  {"band_deltas", cfg.perturb.band_deltas}};
  j["seeds"] = cfg.seeds;
  j["base_seed"] = cfg.base_seed.value;
  return j;
}

std::string provenance_line(const ExperimentConfig& cfg) {
  return "config_hash=" + config_hash_hex(cfg) + " seed=" + std::to_string(cfg.base_seed.value);
}

// ---------------------------------------------------------------------------
// Worker pool: a flat job index drained by an atomic counter. Results
// land in preallocated slots, so the merge order is the job order no
// matter which thread ran what.

void parallel_for(std::size_t n_jobs, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  if (n_jobs == 0) return;
  std::size_t hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t k = std::min(workers == 0 ? hw : workers, n_jobs);
  if (k <= 1) {
    for (std::size_t i = 0; i < n_jobs; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr first_error;
  auto body = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n_jobs) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(k - 1);
  for (std::size_t t = 0; t + 1 < k; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Per-seed data. Stream allocation under derive_seed(base, seed_index):
//   0 source pool (or csv shuffle)   4 proxy draw
//   1 tuple construction             5 proxy score model
//   2 unlabeled pool                 6 prior estimation bootstrap
//   3 audit pool                     7 training
// The gen command reuses seed 0 of this schedule, so its artifacts are
// exactly what the train command sees on the first seed.

struct SeedData {
  datagen::BuiltTuples built;
  UnlabeledPool pool;
  std::vector<InstanceSample> audit_val;
  std::vector<InstanceSample> audit_test;
  std::vector<int> val_labels;
  std::vector<int> test_labels;
  double pi_used = 0.5;
};

std::vector<int> labels_of(const std::vector<InstanceSample>& samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.label) throw std::invalid_argument("audit samples must carry labels");
    out.push_back(*s.label);
  }
  return out;
}

// Draws positives for the estimated regime's proxy set. Oversamples
// the task by 3x the target count so short draws are vanishingly rare.
std::vector<InstanceSample> gaussian_proxy(const TaskSpec& task, RngSeed seed) {
  const auto& g = task.gauss;
  std::size_t want = task.proxy_samples;
  double per_positive = 3.0 / g.prior_pi;
  auto draw = static_cast<std::size_t>(std::ceil(per_positive * static_cast<double>(want)));
  draw = std::max<std::size_t>(draw, 64);
  auto pool = datagen::gen_gaussian_pool(g, draw, seed);
  std::vector<InstanceSample> out;
  out.reserve(want);
  for (const auto& s : pool.samples) {
    if (s.label && *s.label == 1) {
      out.push_back(s);
      if (out.size() == want) break;
    }
  }
  if (out.empty()) throw std::invalid_argument("estimated prior regime drew no positive proxies");
  return out;
}

struct CsvSlices {
  std::vector<InstanceSample> audit;
  UnlabeledPool pool;
  LabeledPool source;
};

// Deterministic per-seed partition of the labeled csv: audit rows
// first, then the unlabeled slice (when no separate csv is given),
// then the tuple source.
CsvSlices slice_csv(const TaskSpec& task, RngSeed seed) {
  auto ingested = datagen::ingest_csv_pool(task.labeled_csv, /*has_labels=*/true);
  auto* labeled = std::get_if<LabeledPool>(&ingested);
  if (labeled == nullptr)
    throw std::invalid_argument("labeled_csv did not parse as a labeled pool");

  bool slice_pool = task.unlabeled_csv.empty();
  std::size_t need =
      task.audit_samples + (slice_pool ? task.unlabeled_samples : 0) + task.source_samples;
  if (labeled->samples.size() < need)
    throw std::invalid_argument("labeled_csv has " + std::to_string(labeled->samples.size()) +
                                " rows; the configured slices need " + std::to_string(need));

  std::vector<std::size_t> order(labeled->samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  CsvSlices out;
  std::size_t cursor = 0;
  out.audit.reserve(task.audit_samples);
  for (std::size_t i = 0; i < task.audit_samples; ++i)
    out.audit.push_back(labeled->samples[order[cursor++]]);
  if (slice_pool) {
    std::vector<InstanceSample> pool_rows;
    pool_rows.reserve(task.unlabeled_samples);
    for (std::size_t i = 0; i < task.unlabeled_samples; ++i)
      pool_rows.push_back(labeled->samples[order[cursor++]]);
    out.pool = strip_labels(make_labeled_pool(std::move(pool_rows)));
  } else {
    auto extra = datagen::ingest_csv_pool(task.unlabeled_csv, /*has_labels=*/false,
                                          task.declared_prior);
    out.pool = std::get<UnlabeledPool>(std::move(extra));
  }
  std::vector<InstanceSample> source_rows;
  source_rows.reserve(task.source_samples);
  for (std::size_t i = 0; i < task.source_samples; ++i)
    source_rows.push_back(labeled->samples[order[cursor++]]);
  out.source = make_labeled_pool(std::move(source_rows));
  return out;
}

std::vector<InstanceSample> positives_of(const std::vector<InstanceSample>& samples,
                                         std::size_t cap) {
  std::vector<InstanceSample> out;
  for (const auto& s : samples) {
    if (s.label && *s.label == 1) {
      out.push_back(s);
      if (out.size() == cap) break;
    }
  }
  if (out.empty()) throw std::invalid_argument("estimated prior regime found no positive rows");
  return out;
}

prior::PriorEstimate estimate_prior_for_seed(const ExperimentConfig& cfg, std::size_t seed_index) {
  RngSeed s = derive_seed(cfg.base_seed, seed_index);
  std::vector<InstanceSample> proxy;
  UnlabeledPool pool;
  if (cfg.task.gaussian) {
    pool = strip_labels(
        datagen::gen_gaussian_pool(cfg.task.gauss, cfg.task.unlabeled_samples, derive_seed(s, 2)));
    proxy = gaussian_proxy(cfg.task, derive_seed(s, 4));
  } else {
    CsvSlices slices = slice_csv(cfg.task, derive_seed(s, 0));
    pool = std::move(slices.pool);
    proxy = positives_of(slices.source.samples, cfg.task.proxy_samples);
  }
  auto scores = prior::fit_score_model(proxy, pool.samples, derive_seed(s, 5));
  return prior::mpe_estimate(scores.proxy_scores, scores.unlabeled_scores, derive_seed(s, 6));
}

SeedData make_seed_data(const ExperimentConfig& cfg, std::size_t seed_index,
                        bool resolve_prior) {
  RngSeed s = derive_seed(cfg.base_seed, seed_index);
  SeedData sd;
  std::vector<InstanceSample> audit;
  if (cfg.task.gaussian) {
    auto source =
        datagen::gen_gaussian_pool(cfg.task.gauss, cfg.task.source_samples, derive_seed(s, 0));
    sd.built = datagen::build_tuples(source, cfg.tuples, derive_seed(s, 1));
    sd.pool = strip_labels(
        datagen::gen_gaussian_pool(cfg.task.gauss, cfg.task.unlabeled_samples, derive_seed(s, 2)));
    audit = datagen::gen_gaussian_pool(cfg.task.gauss, cfg.task.audit_samples, derive_seed(s, 3))
                .samples;
    sd.pi_used = cfg.task.gauss.prior_pi;
  } else {
    CsvSlices slices = slice_csv(cfg.task, derive_seed(s, 0));
    sd.built = datagen::build_tuples(slices.source, cfg.tuples, derive_seed(s, 1));
    sd.pool = std::move(slices.pool);
    audit = std::move(slices.audit);
    sd.pi_used = cfg.task.declared_prior;
  }

  std::size_t n_val = audit.size() / 2;
  sd.audit_val.assign(audit.begin(), audit.begin() + static_cast<std::ptrdiff_t>(n_val));
  sd.audit_test.assign(audit.begin() + static_cast<std::ptrdiff_t>(n_val), audit.end());
  sd.val_labels = labels_of(sd.audit_val);
  sd.test_labels = labels_of(sd.audit_test);

  if (resolve_prior && cfg.prior_regime == PriorRegime::Estimated)
    sd.pi_used = estimate_prior_for_seed(cfg, seed_index).pi_hat;
  return sd;
}

// ---------------------------------------------------------------------------
// Method dispatch.

struct FitOut {
  model::Scorer scorer;
  std::vector<model::TraceRow> trace;
};

ClampKind ntmp_clamp(Method m) {
  switch (m) {
    case Method::NtmpUre: return ClampKind::None;
    case Method::NtmpAbs: return ClampKind::Abs;
    case Method::NtmpRelu: return ClampKind::ReLU;
    default: return ClampKind::Abs;
  }
}

FitOut run_method(Method method, const ExperimentConfig& cfg, const TupleDataset& tuples,
                  const std::vector<std::vector<int>>* audit_labels, const UnlabeledPool& pool,
                  double pi_hat, RngSeed train_seed) {
  if (pool.samples.empty()) throw std::invalid_argument("unlabeled pool is empty");
  model::TrainConfig tcfg = cfg.train;
  tcfg.seed = train_seed;
  tcfg.scorer.input_dim = pool.samples.front().features.size();

  switch (method) {
    case Method::NtmpUre:
    case Method::NtmpAbs:
    case Method::NtmpRelu: {
      tcfg.clamp_kind = ntmp_clamp(method);
      risk::MixConfig mix;
      mix.pi = pi_hat;
      mix.alpha = tuples.effective_alpha();
      mix.min_gap_epsilon = cfg.train.margin_epsilon;
      auto r = model::train_ntmp(tuples, pool, mix, cfg.loss, tcfg, audit_labels);
      return {std::move(r.scorer), std::move(r.trace)};
    }
    case Method::Uu:
    case Method::UuCor: {
      baselines::UuConfig uc;
      uc.prior_1 = pi_hat;
      uc.prior_2 = tuples.effective_alpha();
      uc.clamp_kind = method == Method::UuCor ? ClampKind::Abs : ClampKind::None;
      auto flat = datagen::pool_from_flatten(tuples);
      auto r = baselines::train_uu(pool.samples, flat.samples, uc, cfg.loss, tcfg);
      return {std::move(r.scorer), std::move(r.trace)};
    }
    case Method::Km:
    case Method::KmPlusPlus: {
      // Clustering sees every unlabeled instance available: the pool
      // plus the flattened tuple contents.
      UnlabeledPool all;
      all.samples = pool.samples;
      auto flat = datagen::pool_from_flatten(tuples);
      all.samples.insert(all.samples.end(), flat.samples.begin(), flat.samples.end());
      all.declared_prior = pi_hat;
      all.prior_source = pool.prior_source;
      auto init = method == Method::Km ? baselines::KmInit::Forgy : baselines::KmInit::PlusPlus;
      auto r = baselines::cluster_then_classify(all, init, pi_hat, tcfg);
      return {std::move(r.scorer), std::move(r.trace)};
    }
    case Method::LlpBagce:
    case Method::LlpJs: {
      baselines::LlpConfig lc;
      lc.entropy_weight = cfg.llp_entropy_weight;
      auto kind = method == Method::LlpBagce ? baselines::LlpKind::BagCe : baselines::LlpKind::Js;
      auto r = baselines::train_llp(tuples, kind, lc, tcfg);
      return {std::move(r.scorer), std::move(r.trace)};
    }
  }
  throw std::invalid_argument("unhandled method");
}

// The sweep retrains the tuple estimator; when the first configured
// method is one of its variants the sweep inherits that clamp,
// otherwise it uses the corrected (abs) default.
ClampKind sweep_clamp(const std::vector<Method>& methods) {
  for (Method m : methods) {
    switch (m) {
      case Method::NtmpUre:
      case Method::NtmpAbs:
      case Method::NtmpRelu: return ntmp_clamp(m);
      default: break;
    }
  }
  return ClampKind::Abs;
}

// ---------------------------------------------------------------------------
// File output.

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                 const std::function<void(std::ostream&)>& body) {
  std::filesystem::path p = dir / name;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
  body(os);
  os.flush();
  if (!os) throw std::runtime_error("write to " + p.string() + " failed");
  return p;
}

std::filesystem::path prepare_out_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir = resolve_out_dir(cfg);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_comparison_csv(std::ostream& os, const std::string& prov,
                          const std::vector<ComparisonRow>& rows, const std::string& note) {
  os << "# " << prov << "\n";
  os << "method,ap,auroc,ece_ts,brier_ts,p_holm,cliffs_delta\n";
  for (const auto& r : rows) {
    os << method_name(r.method) << ',' << format_double(r.ap) << ',' << format_double(r.auroc)
       << ',' << format_double(r.ece_ts) << ',' << format_double(r.brier_ts) << ',';
    if (r.p_holm) os << format_double(*r.p_holm);
    os << ',';
    if (r.cliffs_delta) os << format_double(*r.cliffs_delta);
    os << "\n";
  }
  if (!note.empty()) os << "# note: " << note << "\n";
}

// ---------------------------------------------------------------------------
// Comparison building, shared by train and report.

struct MethodSeries {
  Method method = Method::NtmpUre;
  std::vector<double> ap;
  std::vector<double> auroc;
  std::vector<double> ece_ts;
  std::vector<double> brier_ts;
};

std::pair<std::vector<ComparisonRow>, std::string> build_comparison(
    const std::vector<MethodSeries>& series) {
  std::vector<ComparisonRow> rows;
  rows.reserve(series.size());
  for (const auto& s : series) {
    ComparisonRow r;
    r.method = s.method;
    r.ap = mean(s.ap);
    r.auroc = mean(s.auroc);
    r.ece_ts = mean(s.ece_ts);
    r.brier_ts = mean(s.brier_ts);
    rows.push_back(r);
  }

  std::size_t ref = series.size();
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].method == Method::NtmpUre) {
      ref = i;
      break;
    }
  }
  if (series.size() < 2) return {rows, "single method; significance columns left empty"};
  if (ref == series.size())
    return {rows, "no ntmp-ure reference row; significance columns left empty"};

  std::vector<double> raw_p;
  std::vector<std::size_t> tested;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i == ref) continue;
    raw_p.push_back(eval::wilcoxon_signed_rank(series[i].ap, series[ref].ap).p_value);
    tested.push_back(i);
  }
  std::vector<double> adjusted = eval::holm_adjust(raw_p);
  for (std::size_t k = 0; k < tested.size(); ++k) {
    rows[tested[k]].p_holm = adjusted[k];
    rows[tested[k]].cliffs_delta = eval::cliffs_delta(series[tested[k]].ap, series[ref].ap);
  }
  return {rows, ""};
}

void render_comparison(std::ostream& os, const std::vector<ComparisonRow>& rows,
                       const std::string& note) {
  os << std::left << std::setw(12) << "method" << std::right << std::setw(10) << "ap"
     << std::setw(10) << "auroc" << std::setw(10) << "ece_ts" << std::setw(11) << "brier_ts"
     << std::setw(10) << "p_holm" << std::setw(14) << "cliffs_delta" << "\n";
  char buf[32];
  auto cell = [&](std::optional<double> v, int width) {
    if (v) {
      std::snprintf(buf, sizeof buf, "%.4f", *v);
      os << std::setw(width) << buf;
    } else {
      os << std::setw(width) << "-";
    }
  };
  for (const auto& r : rows) {
    os << std::left << std::setw(12) << method_name(r.method) << std::right;
    cell(r.ap, 10);
    cell(r.auroc, 10);
    cell(r.ece_ts, 10);
    cell(r.brier_ts, 11);
    cell(r.p_holm, 10);
    cell(r.cliffs_delta, 14);
    os << "\n";
  }
  if (!note.empty()) os << "note: " << note << "\n";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public surface.

std::string method_name(Method m) {
  for (const auto& e : kMethodTable) {
    if (e.method == m) return e.name;
  }
  throw std::invalid_argument("unhandled method");
}

Method method_from_name(const std::string& name) {
  for (const auto& e : kMethodTable) {
    if (name == e.name) return e.method;
  }
  std::string known;
  for (const auto& e : kMethodTable) {
    if (!known.empty()) known += ", ";
    known += e.name;
  }
  throw std::invalid_argument("unknown method \"" + name + "\" (known: " + known + ")");
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(std::string("not valid JSON: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    config_error(e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::invalid_argument("config: cannot read " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string canonical_config_json(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump();
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  const std::string text = canonical_config_json(cfg);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg) {
  if (cfg.out_dir.is_absolute()) return cfg.out_dir;
  const char* root = std::getenv(kOutRootEnvVar);
  if (root != nullptr && *root != '\0') return std::filesystem::path(root) / cfg.out_dir;
  return cfg.out_dir;
}

GenOutcome cmd_gen(const ExperimentConfig& cfg) {
  // Build everything in memory first: an infeasible tuple spec must
  // fail before any artifact exists on disk.
  SeedData sd = make_seed_data(cfg, 0, /*resolve_prior=*/false);
  std::filesystem::path dir = prepare_out_dir(cfg);
  const std::string prov = provenance_line(cfg);

  GenOutcome out;
  out.n_tuples = sd.built.dataset.tuples.size();
  out.pool_samples = sd.pool.samples.size();
  out.files.push_back(write_file(dir, "pool.csv", [&](std::ostream& os) {
    datagen::write_pool_csv(os, sd.pool.samples, /*with_labels=*/false, prov);
  }));
  out.files.push_back(write_file(dir, "tuples.jsonl", [&](std::ostream& os) {
    datagen::write_tuples_jsonl(os, sd.built.dataset);
  }));
  out.files.push_back(write_file(dir, "tuple_instances.csv", [&](std::ostream& os) {
    datagen::write_tuple_instances_csv(os, sd.built.dataset, prov);
  }));
  out.files.push_back(write_file(dir, "audit.csv", [&](std::ostream& os) {
    datagen::write_audit_csv(os, sd.built.audit, prov);
  }));
  return out;
}

TrainOutcome cmd_train(const ExperimentConfig& cfg) {
  std::filesystem::path dir = prepare_out_dir(cfg);
  const std::string prov = provenance_line(cfg);

  std::vector<SeedData> bundles(cfg.seeds);
  parallel_for(cfg.seeds, cfg.workers,
               [&](std::size_t i) { bundles[i] = make_seed_data(cfg, i, /*resolve_prior=*/true); });

  struct JobOut {
    eval::MetricReport report;
    std::vector<model::TraceRow> trace;
  };
  const std::size_t n_jobs = cfg.methods.size() * cfg.seeds;
  std::vector<JobOut> jobs(n_jobs);
  parallel_for(n_jobs, cfg.workers, [&](std::size_t j) {
    const std::size_t mi = j / cfg.seeds;
    const std::size_t si = j % cfg.seeds;
    const SeedData& sd = bundles[si];
    RngSeed train_seed = derive_seed(derive_seed(cfg.base_seed, si), 7);
    FitOut fit = run_method(cfg.methods[mi], cfg, sd.built.dataset, &sd.built.audit.labels,
                            sd.pool, sd.pi_used, train_seed);
    std::vector<double> test_scores;
    std::vector<double> val_scores;
    fit.scorer.score_batch(sd.audit_test, test_scores);
    fit.scorer.score_batch(sd.audit_val, val_scores);
    jobs[j] = {eval::metric_report(test_scores, sd.test_labels, val_scores, sd.val_labels),
               std::move(fit.trace)};
  });

  TrainOutcome out;
  out.rows.reserve(n_jobs);
  std::vector<MethodSeries> series(cfg.methods.size());
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    series[mi].method = cfg.methods[mi];
    for (std::size_t si = 0; si < cfg.seeds; ++si) {
      const auto& rep = jobs[mi * cfg.seeds + si].report;
      out.rows.push_back({cfg.methods[mi], si, rep});
      series[mi].ap.push_back(rep.ap);
      series[mi].auroc.push_back(rep.auroc);
      series[mi].ece_ts.push_back(rep.ece_ts);
      series[mi].brier_ts.push_back(rep.brier_ts);
    }
  }
  std::tie(out.comparison, out.note) = build_comparison(series);

  out.files.push_back(write_file(dir, "metrics.csv", [&](std::ostream& os) {
    os << "# " << prov << "\n";
    os << "method,seed," << eval::metric_report_csv_header() << "\n";
    for (const auto& row : out.rows) {
      os << method_name(row.method) << ',' << row.seed_index << ','
         << eval::metric_report_csv_row(row.report) << "\n";
    }
  }));
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    for (std::size_t si = 0; si < cfg.seeds; ++si) {
      std::string name =
          "trace_" + method_name(cfg.methods[mi]) + "_seed" + std::to_string(si) + ".csv";
      out.files.push_back(write_file(dir, name, [&](std::ostream& os) {
        os << "# " << prov << "\n";
        model::write_trace_csv(os, jobs[mi * cfg.seeds + si].trace);
      }));
    }
  }
  out.files.push_back(write_file(dir, "comparison.csv", [&](std::ostream& os) {
    write_comparison_csv(os, prov, out.comparison, out.note);
  }));
  return out;
}

PriorOutcome cmd_estimate_prior(const ExperimentConfig& cfg) {
  std::filesystem::path dir = prepare_out_dir(cfg);
  PriorOutcome out;
  out.estimates.resize(cfg.seeds);
  parallel_for(cfg.seeds, cfg.workers,
               [&](std::size_t i) { out.estimates[i] = estimate_prior_for_seed(cfg, i); });

  out.files.push_back(write_file(dir, "prior_estimate.csv", [&](std::ostream& os) {
    os << "# " << provenance_line(cfg) << "\n";
    os << "seed,pi_hat,ci_low,ci_high,np_lower_bound,lb_ci_low,lb_ci_high\n";
    for (std::size_t i = 0; i < out.estimates.size(); ++i) {
      const auto& e = out.estimates[i];
      os << i << ',' << format_double(e.pi_hat) << ',' << format_double(e.ci_low) << ','
         << format_double(e.ci_high) << ',' << format_double(e.np_lower_bound) << ','
         << format_double(e.lb_ci_low) << ',' << format_double(e.lb_ci_high) << "\n";
    }
  }));
  return out;
}

SweepOutcome cmd_sweep(const ExperimentConfig& cfg) {
  std::filesystem::path dir = prepare_out_dir(cfg);
  const std::string prov = provenance_line(cfg);
  SeedData sd = make_seed_data(cfg, 0, /*resolve_prior=*/true);

  prior::SweepConfig sc;
  sc.train = cfg.train;
  sc.train.scorer.input_dim = sd.pool.samples.front().features.size();
  sc.train.clamp_kind = sweep_clamp(cfg.methods);
  sc.loss = cfg.loss;
  sc.deltas = cfg.sweep.deltas;
  sc.seeds = cfg.seeds;
  sc.bootstrap_b = cfg.sweep.bootstrap_b;
  sc.metric = cfg.sweep.metric;
  sc.min_gap_epsilon = cfg.train.margin_epsilon;

  SweepOutcome out;
  out.sweep = prior::delta_sweep(sd.built.dataset, sd.pool, sd.audit_test, sd.pi_used, sc,
                                 derive_seed(cfg.base_seed, 40));
  out.window = eval::robustness_window(out.sweep, cfg.sweep.epsilon, cfg.sweep.w_star);

  out.files.push_back(write_file(dir, "sweep_points.csv", [&](std::ostream& os) {
    os << "# " << prov << "\n";
    eval::write_sweep_csv(os, out.sweep);
  }));
  out.files.push_back(write_file(dir, "sweep_aggregate.csv", [&](std::ostream& os) {
    os << "# " << prov << "\n";
    eval::write_sweep_aggregate_csv(os, out.sweep, &out.window);
  }));
  out.files.push_back(write_file(dir, "sweep_summary.csv", [&](std::ostream& os) {
    os << "# " << prov << "\n";
    os << "pi,delta,mean,stddev,ci_low,ci_high,ill_conditioned,in_window,is_delta_crit\n";
    for (const auto& p : out.sweep.points) {
      double gap = std::fabs(p.delta);
      bool in_window = !p.ill_conditioned && gap >= out.window.delta_min - 1e-12 &&
                       gap <= out.window.delta_max + 1e-12;
      bool is_crit =
          out.window.delta_crit && std::fabs(gap - *out.window.delta_crit) <= 1e-12;
      os << format_double(p.pi) << ',' << format_double(p.delta) << ',' << format_double(p.mean)
         << ',' << format_double(p.stddev) << ',' << format_double(p.ci_low) << ','
         << format_double(p.ci_high) << ',' << (p.ill_conditioned ? 1 : 0) << ','
         << (in_window ? 1 : 0) << ',' << (is_crit ? 1 : 0) << "\n";
    }
  }));
  return out;
}

PerturbOutcome cmd_perturb(const ExperimentConfig& cfg) {
  std::filesystem::path dir = prepare_out_dir(cfg);
  const std::string prov = provenance_line(cfg);
  const Method method = cfg.methods.front();

  std::vector<SeedData> bundles(cfg.seeds);
  parallel_for(cfg.seeds, cfg.workers,
               [&](std::size_t i) { bundles[i] = make_seed_data(cfg, i, /*resolve_prior=*/true); });

  struct PerturbJob {
    const char* family;
    double param;
    std::size_t param_index;
    std::size_t seed_index;
  };
  std::vector<PerturbJob> plan;
  const double f = cfg.perturb.prior_noise_frac;
  const double prior_params[] = {-f, 0.0, f};
  for (std::size_t pi = 0; pi < 3; ++pi)
    for (std::size_t si = 0; si < cfg.seeds; ++si) plan.push_back({"prior", prior_params[pi], pi, si});
  for (std::size_t pi = 0; pi < cfg.perturb.flip_probs.size(); ++pi)
    for (std::size_t si = 0; si < cfg.seeds; ++si)
      plan.push_back({"count", cfg.perturb.flip_probs[pi], pi, si});
  for (std::size_t pi = 0; pi < cfg.perturb.band_deltas.size(); ++pi)
    for (std::size_t si = 0; si < cfg.seeds; ++si)
      plan.push_back({"band", cfg.perturb.band_deltas[pi], pi, si});

  PerturbOutcome out;
  out.rows.resize(plan.size());
  parallel_for(plan.size(), cfg.workers, [&](std::size_t j) {
    const PerturbJob& job = plan[j];
    const SeedData& sd = bundles[job.seed_index];
    RngSeed s = derive_seed(cfg.base_seed, job.seed_index);

    const TupleDataset* tuples = &sd.built.dataset;
    TupleDataset corrupted;
    double pi_hat = sd.pi_used;
    if (job.family == std::string("prior")) {
      pi_hat = sd.pi_used * (1.0 + job.param);
    } else if (job.family == std::string("count")) {
      corrupted = datagen::corrupt_counts(sd.built.dataset, job.param,
                                          derive_seed(s, 100 + job.param_index));
      tuples = &corrupted;
    } else {
      pi_hat = sd.built.dataset.effective_alpha() + job.param;
    }

    PerturbRow row;
    row.family = job.family;
    row.param = job.param;
    row.seed_index = job.seed_index;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.cor = row.tpr = row.fpr = row.f1 = nan;
    if (!(pi_hat > 0.0 && pi_hat < 1.0)) {
      row.ill_conditioned = true;
    } else {
      try {
        FitOut fit = run_method(method, cfg, *tuples, &sd.built.audit.labels, sd.pool, pi_hat,
                                derive_seed(s, 7));
        auto preds = model::predict_labels(fit.scorer, sd.audit_test);
        auto cm = eval::confusion_metrics(preds, sd.test_labels);
        row.cor = cm.accuracy;
        row.tpr = cm.tpr;
        row.fpr = cm.fpr;
        row.f1 = cm.f1;
      } catch (const risk::IllConditionedError&) {
        row.ill_conditioned = true;
      } catch (const risk::UnsplittableDegenerateError&) {
        row.ill_conditioned = true;
      }
    }
    out.rows[j] = row;
  });

  auto metric_cell = [](const PerturbRow& r, double v) {
    return r.ill_conditioned ? std::string() : format_double(v);
  };
  out.files.push_back(write_file(dir, "perturb.csv", [&](std::ostream& os) {
    os << "# " << prov << "\n";
    os << "family,param,seed,cor,tpr,fpr,f1,ill_conditioned\n";
    for (const auto& r : out.rows) {
      os << r.family << ',' << format_double(r.param) << ',' << r.seed_index << ','
         << metric_cell(r, r.cor) << ',' << metric_cell(r, r.tpr) << ','
         << metric_cell(r, r.fpr) << ',' << metric_cell(r, r.f1) << ','
         << (r.ill_conditioned ? 1 : 0) << "\n";
    }
  }));
  out.files.push_back(write_file(dir, "perturb_summary.csv", [&](std::ostream& os) {
    os << "# " << prov << "\n";
    os << "family,param,cor,tpr,fpr,f1,ill_count,seeds\n";
    // Aggregate rows come out in plan order: prior, count, band, each
    // with its params in config order.
    for (std::size_t base = 0; base < out.rows.size(); base += cfg.seeds) {
      std::vector<double> cor, tpr, fpr, f1;
      std::size_t ill = 0;
      for (std::size_t si = 0; si < cfg.seeds; ++si) {
        const auto& r = out.rows[base + si];
        if (r.ill_conditioned) {
          ++ill;
          continue;
        }
        cor.push_back(r.cor);
        tpr.push_back(r.tpr);
        fpr.push_back(r.fpr);
        f1.push_back(r.f1);
      }
      const auto& head = out.rows[base];
      os << head.family << ',' << format_double(head.param) << ',';
      if (cor.empty()) {
        os << ",,,";
      } else {
        os << format_double(mean(cor)) << ',' << format_double(mean(tpr)) << ','
           << format_double(mean(fpr)) << ',' << format_double(mean(f1));
      }
      os << ',' << ill << ',' << cfg.seeds << "\n";
    }
  }));
  return out;
}

ReportOutcome cmd_report(const ExperimentConfig& cfg) {
  std::filesystem::path dir = resolve_out_dir(cfg);
  std::filesystem::path metrics_path = dir / "metrics.csv";
  std::ifstream is(metrics_path, std::ios::binary);
  if (!is)
    throw std::invalid_argument("report: " + metrics_path.string() +
                                " not found; run the train command first");

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.size() < 3 || header[0] != "method" || header[1] != "seed")
    throw datagen::CsvParseError("metrics.csv must start with method,seed columns", line_no);
  auto column = [&](const char* name) {
    for (std::size_t i = 2; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw datagen::CsvParseError(std::string("metrics.csv is missing the ") + name + " column",
                                 line_no);
  };
  const std::size_t c_ap = column("ap");
  const std::size_t c_auroc = column("auroc");
  const std::size_t c_ece = column("ece_ts");
  const std::size_t c_brier = column("brier_ts");

  std::vector<MethodSeries> series;
  std::vector<std::vector<std::size_t>> seen_seeds;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw datagen::CsvParseError("metrics.csv row has " + std::to_string(fields.size()) +
                                       " fields, header has " + std::to_string(header.size()),
                                   line_no);
    Method m{};
    std::size_t seed = 0;
    double ap = 0, auroc = 0, ece = 0, brier = 0;
    try {
      m = method_from_name(fields[0]);
      seed = std::stoul(fields[1]);
      ap = std::stod(fields[c_ap]);
      auroc = std::stod(fields[c_auroc]);
      ece = std::stod(fields[c_ece]);
      brier = std::stod(fields[c_brier]);
    } catch (const std::exception& e) {
      throw datagen::CsvParseError(std::string("metrics.csv: ") + e.what(), line_no);
    }
    std::size_t idx = series.size();
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (series[i].method == m) {
        idx = i;
        break;
      }
    }
    if (idx == series.size()) {
      series.push_back(MethodSeries{m, {}, {}, {}, {}});
      seen_seeds.emplace_back();
    }
    // Rows are stored seed-ascending per method, which keeps the
    // significance pairing aligned across methods.
    auto& order = seen_seeds[idx];
    std::size_t pos = order.size();
    while (pos > 0 && order[pos - 1] > seed) --pos;
    order.insert(order.begin() + static_cast<std::ptrdiff_t>(pos), seed);
    auto& s = series[idx];
    auto ins = [&](std::vector<double>& v, double x) {
      v.insert(v.begin() + static_cast<std::ptrdiff_t>(pos), x);
    };
    ins(s.ap, ap);
    ins(s.auroc, auroc);
    ins(s.ece_ts, ece);
    ins(s.brier_ts, brier);
  }
  if (series.empty()) throw datagen::CsvParseError("metrics.csv has no data rows", line_no);

  ReportOutcome out;
  std::tie(out.comparison, out.note) = build_comparison(series);
  out.files.push_back(write_file(dir, "comparison.csv", [&](std::ostream& os) {
    write_comparison_csv(os, provenance_line(cfg), out.comparison, out.note);
  }));
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  static const char* kUsage =
      "usage: ntmp <gen|train|estimate-prior|sweep|perturb|report> <config.json>\n"
      "\n"
      "Runs the subcommand described by the JSON config file. Relative\n"
      "out_dir paths resolve against $NTMP_OUT_ROOT when it is set.\n"
      "Exit codes: 0 ok, 2 config error, 3 infeasible data spec,\n"
      "4 ill-conditioned prior/rate collision, 1 anything else.\n";

  if (args.empty()) {
    err << kUsage;
    return kExitConfigError;
  }
  const std::string& sub = args[0];
  if (sub == "help" || sub == "--help" || sub == "-h") {
    out << kUsage;
    return kExitOk;
  }

  try {
    if (args.size() != 2)
      throw std::invalid_argument("expected exactly one config path after the subcommand");
    const ExperimentConfig cfg = load_config(args[1]);
    const std::filesystem::path dir = resolve_out_dir(cfg);

    if (sub == "gen") {
      GenOutcome o = cmd_gen(cfg);
      out << "gen: " << o.n_tuples << " tuples, " << o.pool_samples << " pool samples -> "
          << dir.string() << " (" << o.files.size() << " files)\n";
    } else if (sub == "train") {
      TrainOutcome o = cmd_train(cfg);
      out << "train: " << cfg.methods.size() << " methods x " << cfg.seeds << " seeds, "
          << o.rows.size() << " metric rows -> " << dir.string() << "\n";
      render_comparison(out, o.comparison, o.note);
    } else if (sub == "estimate-prior") {
      PriorOutcome o = cmd_estimate_prior(cfg);
      for (std::size_t i = 0; i < o.estimates.size(); ++i) {
        const auto& e = o.estimates[i];
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "seed %zu: pi_hat=%.4f ci=[%.4f, %.4f] lower_bound=%.4f\n", i, e.pi_hat,
                      e.ci_low, e.ci_high, e.np_lower_bound);
        out << buf;
      }
    } else if (sub == "sweep") {
      SweepOutcome o = cmd_sweep(cfg);
      out << "sweep: " << o.sweep.points.size() << " grid points around pi="
          << format_double(o.sweep.pi_center) << " (" << o.sweep.metric_name << ")\n";
      out << "robust gap window: [" << format_double(o.window.delta_min) << ", "
          << format_double(o.window.delta_max) << "]";
      if (o.window.delta_crit)
        out << ", critical gap " << format_double(*o.window.delta_crit);
      out << "\n";
    } else if (sub == "perturb") {
      PerturbOutcome o = cmd_perturb(cfg);
      std::size_t ill = 0;
      for (const auto& r : o.rows) ill += r.ill_conditioned ? 1 : 0;
      out << "perturb: " << o.rows.size() << " rows (" << ill << " ill-conditioned) -> "
          << dir.string() << "\n";
    } else if (sub == "report") {
      ReportOutcome o = cmd_report(cfg);
      render_comparison(out, o.comparison, o.note);
    } else {
      throw std::invalid_argument("unknown subcommand \"" + sub + "\"");
    }
    return kExitOk;
  } catch (const datagen::CsvParseError& e) {
    err << "error: " << e.what() << " (line " << e.line() << ")\n";
    return kExitConfigError;
  } catch (const datagen::InfeasibleDataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const risk::IllConditionedError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIllConditioned;
  } catch (const risk::UnsplittableDegenerateError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIllConditioned;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace ntmp::cli
