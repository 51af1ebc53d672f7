#include "ntmp/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ntmp::model {

namespace {

double activate(Activation a, double z) {
  return a == Activation::ReLU ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double activate_grad(Activation a, double z) {
  if (a == Activation::ReLU) return z > 0.0 ? 1.0 : 0.0;
  double t = std::tanh(z);
  return 1.0 - t * t;
}

std::size_t expected_param_count(const ScorerSpec& spec) {
  if (spec.kind == ScorerKind::Linear) return spec.input_dim + 1;
  return spec.hidden_width * spec.input_dim + 2 * spec.hidden_width + 1;
}

void check_input(const ScorerSpec& spec, const std::vector<double>& x) {
  if (x.size() != spec.input_dim) {
    throw std::invalid_argument("scorer expected " + std::to_string(spec.input_dim) +
                                " features, got " + std::to_string(x.size()));
  }
}

}  // namespace

std::string activation_name(Activation a) {
  return a == Activation::ReLU ? "relu" : "tanh";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string scorer_kind_name(ScorerKind k) {
  return k == ScorerKind::Linear ? "linear" : "mlp1";
}

ScorerKind scorer_kind_from_name(const std::string& name) {
  if (name == "linear") return ScorerKind::Linear;
  if (name == "mlp1") return ScorerKind::Mlp1;
  throw std::invalid_argument("unknown scorer kind: " + name);
}

Scorer Scorer::make(const ScorerSpec& spec, Rng& rng) {
  if (spec.input_dim == 0) throw std::invalid_argument("scorer input_dim must be positive");
  if (spec.kind == ScorerKind::Mlp1 && spec.hidden_width == 0) {
    throw std::invalid_argument("mlp1 hidden_width must be positive");
  }
  Scorer s;
  s.spec_ = spec;
  s.params_.assign(expected_param_count(spec), 0.0);
  if (spec.kind == ScorerKind::Mlp1) {
    std::size_t d = spec.input_dim;
    std::size_t h = spec.hidden_width;
    double bound1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < h * d; ++i) s.params_[i] = rng.uniform(-bound1, bound1);
    double bound2 = 1.0 / std::sqrt(static_cast<double>(h));
    std::size_t w2_off = h * d + h;
    for (std::size_t j = 0; j < h; ++j) s.params_[w2_off + j] = rng.uniform(-bound2, bound2);
  }
  return s;
}

double Scorer::score(const std::vector<double>& x) const {
  check_input(spec_, x);
  std::size_t d = spec_.input_dim;
  if (spec_.kind == ScorerKind::Linear) {
    double acc = params_[d];
    for (std::size_t i = 0; i < d; ++i) acc += params_[i] * x[i];
    return acc;
  }
  std::size_t h = spec_.hidden_width;
  const double* w1 = params_.data();
  const double* b1 = params_.data() + h * d;
  const double* w2 = b1 + h;
  double b2 = params_[h * d + 2 * h];
  double acc = b2;
  for (std::size_t j = 0; j < h; ++j) {
    double z = b1[j];
    const double* row = w1 + j * d;
    for (std::size_t i = 0; i < d; ++i) z += row[i] * x[i];
    acc += w2[j] * activate(spec_.activation, z);
  }
  return acc;
}

void Scorer::score_batch(const std::vector<InstanceSample>& xs, std::vector<double>& out) const {
  out.resize(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = score(xs[i].features);
}

void Scorer::accumulate_score_grad(const std::vector<double>& x, double upstream,
                                   std::vector<double>& grad) const {
  check_input(spec_, x);
  if (grad.size() != params_.size()) {
    throw std::invalid_argument("gradient buffer size mismatch");
  }
  std::size_t d = spec_.input_dim;
  if (spec_.kind == ScorerKind::Linear) {
    for (std::size_t i = 0; i < d; ++i) grad[i] += upstream * x[i];
    grad[d] += upstream;
    return;
  }
  std::size_t h = spec_.hidden_width;
  const double* w1 = params_.data();
  const double* b1 = params_.data() + h * d;
  const double* w2 = b1 + h;
  std::size_t b1_off = h * d;
  std::size_t w2_off = h * d + h;
  std::size_t b2_off = h * d + 2 * h;
  for (std::size_t j = 0; j < h; ++j) {
    double z = b1[j];
    const double* row = w1 + j * d;
    for (std::size_t i = 0; i < d; ++i) z += row[i] * x[i];
    double a = activate(spec_.activation, z);
    grad[w2_off + j] += upstream * a;
    double back = upstream * w2[j] * activate_grad(spec_.activation, z);
    if (back != 0.0) {
      grad[b1_off + j] += back;
      for (std::size_t i = 0; i < d; ++i) grad[j * d + i] += back * x[i];
    }
  }
  grad[b2_off] += upstream;
}

int Scorer::predict(const std::vector<double>& x, double threshold) const {
  return score(x) > threshold ? 1 : -1;
}

std::string Scorer::to_json() const {
  nlohmann::json j;
  j["kind"] = scorer_kind_name(spec_.kind);
  j["input_dim"] = spec_.input_dim;
  if (spec_.kind == ScorerKind::Mlp1) {
    j["hidden_width"] = spec_.hidden_width;
    j["activation"] = activation_name(spec_.activation);
  }
  j["params"] = params_;
  return j.dump(2);
}

Scorer Scorer::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Scorer s;
  s.spec_.kind = scorer_kind_from_name(j.at("kind").get<std::string>());
  s.spec_.input_dim = j.at("input_dim").get<std::size_t>();
  if (s.spec_.kind == ScorerKind::Mlp1) {
    s.spec_.hidden_width = j.at("hidden_width").get<std::size_t>();
    s.spec_.activation = activation_from_name(j.at("activation").get<std::string>());
  }
  s.params_ = j.at("params").get<std::vector<double>>();
  if (s.params_.size() != expected_param_count(s.spec_)) {
    throw std::invalid_argument("model parameter count does not match its architecture");
  }
  return s;
}

}  // namespace ntmp::model
