#include "ntmp/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ntmp {

double clip_score(double s) {
  return std::clamp(s, -kScoreClip, kScoreClip);
}

LabeledPool make_labeled_pool(std::vector<InstanceSample> samples) {
  std::size_t pos = 0;
  for (const auto& s : samples) {
    if (!s.label.has_value()) {
      throw std::invalid_argument("labeled pool requires a label on every sample");
    }
    if (*s.label != 1 && *s.label != -1) {
      throw std::invalid_argument("labels must be +1 or -1");
    }
    if (*s.label == 1) ++pos;
  }
  LabeledPool pool;
  pool.prior = samples.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(samples.size());
  pool.samples = std::move(samples);
  return pool;
}

UnlabeledPool strip_labels(const LabeledPool& pool) {
  UnlabeledPool out;
  out.samples.reserve(pool.samples.size());
  for (const auto& s : pool.samples) {
    out.samples.push_back(InstanceSample{s.features, std::nullopt});
  }
  out.declared_prior = pool.prior;
  out.prior_source = PriorSource::KnownByConstruction;
  return out;
}

std::size_t TupleDataset::instance_count() const {
  std::size_t total = 0;
  for (const auto& t : tuples) total += static_cast<std::size_t>(t.n);
  return total;
}

double TupleDataset::effective_alpha() const {
  if (tuples.empty()) {
    throw std::invalid_argument("effective alpha of an empty tuple dataset");
  }
  long long m_sum = 0, n_sum = 0;
  for (const auto& t : tuples) {
    m_sum += t.m;
    n_sum += t.n;
  }
  return static_cast<double>(m_sum) / static_cast<double>(n_sum);
}

// ---------------------------------------------------------------------------
// Losses.

LossSpec LossSpec::logistic() {
  LossSpec s;
  s.kind = LossKind::Logistic;
  s.lipschitz_rho = 1.0;
  // sup over the clipped range is at margin -kScoreClip.
  s.bound_B = kScoreClip + std::log1p(std::exp(-kScoreClip));
  return s;
}

LossSpec LossSpec::sigmoid() {
  LossSpec s;
  s.kind = LossKind::Sigmoid;
  s.lipschitz_rho = 0.25;
  s.bound_B = 1.0;
  return s;
}

LossSpec LossSpec::squared_hinge() {
  LossSpec s;
  s.kind = LossKind::SquaredHinge;
  s.lipschitz_rho = 2.0 * (1.0 + kScoreClip);
  s.bound_B = (1.0 + kScoreClip) * (1.0 + kScoreClip);
  return s;
}

double loss_value(const LossSpec& spec, double margin) {
  if (!std::isfinite(margin)) {
    throw std::invalid_argument("loss_value: non-finite margin");
  }
  switch (spec.kind) {
    case LossKind::Logistic:
      // log(1 + e^-t), computed on the stable side.
      return margin >= 0.0 ? std::log1p(std::exp(-margin))
                           : -margin + std::log1p(std::exp(margin));
    case LossKind::Sigmoid:
      return sigmoid(-margin);
    case LossKind::SquaredHinge: {
      double u = std::max(0.0, 1.0 - margin);
      return u * u;
    }
  }
  throw std::logic_error("unreachable loss kind");
}

double loss_grad(const LossSpec& spec, double margin) {
  if (!std::isfinite(margin)) {
    throw std::invalid_argument("loss_grad: non-finite margin");
  }
  switch (spec.kind) {
    case LossKind::Logistic:
      return -sigmoid(-margin);
    case LossKind::Sigmoid: {
      double s = sigmoid(margin);
      return -s * (1.0 - s);
    }
    case LossKind::SquaredHinge:
      return -2.0 * std::max(0.0, 1.0 - margin);
  }
  throw std::logic_error("unreachable loss kind");
}

double pos_loss(const LossSpec& spec, double score) {
  return loss_value(spec, clip_score(score));
}

double neg_loss(const LossSpec& spec, double score) {
  return loss_value(spec, -clip_score(score));
}

double pos_loss_dscore(const LossSpec& spec, double score) {
  if (score <= -kScoreClip || score >= kScoreClip) return 0.0;
  return loss_grad(spec, score);
}

double neg_loss_dscore(const LossSpec& spec, double score) {
  if (score <= -kScoreClip || score >= kScoreClip) return 0.0;
  return -loss_grad(spec, -score);
}

double apply_clamp(ClampKind kind, double v) {
  switch (kind) {
    case ClampKind::None: return v;
    case ClampKind::ReLU: return std::max(0.0, v);
    case ClampKind::Abs: return std::abs(v);
  }
  throw std::logic_error("unreachable clamp kind");
}

double clamp_subgradient(ClampKind kind, double v) {
  switch (kind) {
    case ClampKind::None: return 1.0;
    case ClampKind::ReLU: return v > 0.0 ? 1.0 : 0.0;
    case ClampKind::Abs: return v < 0.0 ? -1.0 : 1.0;
  }
  throw std::logic_error("unreachable clamp kind");
}

const char* clamp_kind_name(ClampKind kind) {
  switch (kind) {
    case ClampKind::None: return "none";
    case ClampKind::ReLU: return "relu";
    case ClampKind::Abs: return "abs";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// RNG.

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return base ^ splitmix64(stream);
}

Rng::Rng(RngSeed seed) : seed_(seed.value) {
  std::uint64_t x = seed.value;
  for (auto& w : s_) {
    x = splitmix64(x + 0x9e3779b97f4a7c15ULL);
    w = x;
  }
  // All-zero state would be absorbing; splitmix of anything is nonzero in
  // practice, but guard anyway.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

static inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t Rng::next_u64() {
  // xoshiro256++
  std::uint64_t result = rotl64(s_[0] + s_[3], 23) + s_[0];
  std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl64(s_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  // Box-Muller; shift u1 away from zero so the log is finite.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::normal(double mu, double sigma) {
  return mu + sigma * normal();
}

bool Rng::bernoulli(double p) {
  return uniform01() < p;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Rng Rng::child(std::uint64_t stream) const {
  return Rng(RngSeed{derive_seed(seed_, stream)});
}

// ---------------------------------------------------------------------------
// Numeric helpers.

double stable_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty range");
  return stable_sum(xs) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("variance of empty range");
  double mu = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return acc / static_cast<double>(xs.size());
}

double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double mu = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace ntmp
