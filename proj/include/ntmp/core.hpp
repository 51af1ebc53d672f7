#pragma once

// Core vocabulary shared by every module: instance samples and pools,
// count-annotated tuples, surrogate losses, and the deterministic RNG
// that all randomized routines draw from.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ntmp {

// Scores are clipped to [-kScoreClip, kScoreClip] before any loss
// evaluation. This bounds every surrogate on the working range and keeps
// the risk-correction algebra numerically sane; raw scores are kept
// unclipped everywhere else (ranking metrics, serialization).
inline constexpr double kScoreClip = 30.0;

double clip_score(double s);

struct InstanceSample {
  std::vector<double> features;
  // +1 or -1 when known. Training code never reads this; it exists so
  // audit sets can carry ground truth for evaluation.
  std::optional<int> label;
};

// Fully labeled pool. `prior` is the empirical positive fraction and is
// computed by make_labeled_pool, never asserted from outside.
struct LabeledPool {
  std::vector<InstanceSample> samples;
  double prior = 0.0;
};

LabeledPool make_labeled_pool(std::vector<InstanceSample> samples);

enum class PriorSource { KnownByConstruction, Estimated };

struct UnlabeledPool {
  std::vector<InstanceSample> samples;
  double declared_prior = 0.5;
  PriorSource prior_source = PriorSource::KnownByConstruction;
};

// Drops labels from a labeled pool; the declared prior is the pool's
// empirical positive fraction (known by construction).
UnlabeledPool strip_labels(const LabeledPool& pool);

// One training example: n instances of which exactly m are positive.
// Which ones are positive is unknown. The count pair is stored exactly
// as integers; alpha() derives the positive rate m/n on demand.
struct TupleRecord {
  std::vector<InstanceSample> instances;
  int n = 0;
  int m = 0;

  double alpha() const { return static_cast<double>(m) / static_cast<double>(n); }
};

struct TupleDataset {
  std::vector<TupleRecord> tuples;

  std::size_t instance_count() const;
  // Instance-weighted positive rate: sum(m_t) / sum(n_t).
  double effective_alpha() const;
};

// ---------------------------------------------------------------------------
// Surrogate losses.
//
// A loss is evaluated on the margin t = y * g(x) through phi(t); the
// negative-label value psi(t) = phi(-t). bound_B is the supremum of the
// loss over the clipped score range (the constant the bias and clamp
// analysis needs); lipschitz_rho bounds |phi'| on that range.

enum class LossKind { Logistic, Sigmoid, SquaredHinge };

struct LossSpec {
  LossKind kind = LossKind::Logistic;
  double lipschitz_rho = 1.0;
  double bound_B = 0.0;

  static LossSpec logistic();
  static LossSpec sigmoid();
  static LossSpec squared_hinge();
};

// phi(margin). Throws std::invalid_argument on non-finite margin.
double loss_value(const LossSpec& spec, double margin);
// d phi / d margin.
double loss_grad(const LossSpec& spec, double margin);

// Loss of a raw score against a fixed label, with clipping applied.
// pos_* evaluate phi(clip(s)), neg_* evaluate psi(clip(s)) = phi(-clip(s)).
// The *_dscore variants differentiate through the clip, so they return 0
// outside the open interval (-kScoreClip, kScoreClip).
double pos_loss(const LossSpec& spec, double score);
double neg_loss(const LossSpec& spec, double score);
double pos_loss_dscore(const LossSpec& spec, double score);
double neg_loss_dscore(const LossSpec& spec, double score);

// Clamp applied to a risk component: identity, max(0, .) or |.|.
// Subgradient convention at 0: ReLU uses 0, Abs uses +1.
enum class ClampKind { None, ReLU, Abs };

double apply_clamp(ClampKind kind, double v);
double clamp_subgradient(ClampKind kind, double v);

const char* clamp_kind_name(ClampKind kind);

// ---------------------------------------------------------------------------
// Deterministic randomness.
//
// Every randomized routine takes an RngSeed and derives all of its draws
// from it through Rng below. The generator is a self-contained
// xoshiro256++ with hand-rolled distributions, so equal seeds give
// bit-identical streams on every platform; nothing depends on the
// standard library's (implementation-defined) distribution objects.

struct RngSeed {
  std::uint64_t value = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Derive an independent stream seed, e.g. for one grid point or one
// worker job. Defined as base ^ splitmix64(stream).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

inline RngSeed derive_seed(RngSeed base, std::uint64_t stream) {
  return RngSeed{derive_seed(base.value, stream)};
}

class Rng {
 public:
  explicit Rng(RngSeed seed);
  explicit Rng(std::uint64_t seed) : Rng(RngSeed{seed}) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform01();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller (second draw cached).
  double normal();
  double normal(double mu, double sigma);
  bool bernoulli(double p);

  // Unbiased integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  Rng child(std::uint64_t stream) const;

 private:
  std::uint64_t s_[4];  // xoshiro-style state built from splitmix64
  std::uint64_t seed_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Small numeric helpers.

// Neumaier-compensated sum; deterministic left-to-right order.
double stable_sum(std::span<const double> xs);
double mean(std::span<const double> xs);
double variance(std::span<const double> xs);  // population variance
double sample_stddev(std::span<const double> xs);

double sigmoid(double x);

// Format a double with round-trip precision ("%.17g"); shared by every
// serializer so reruns are byte-identical.
std::string format_double(double v);

}  // namespace ntmp
