#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ntmp/core.hpp"

namespace ntmp::model {

enum class Activation { ReLU, Tanh };
enum class ScorerKind { Linear, Mlp1 };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);
std::string scorer_kind_name(ScorerKind k);
ScorerKind scorer_kind_from_name(const std::string& name);

struct ScorerSpec {
  ScorerKind kind = ScorerKind::Linear;
  std::size_t input_dim = 0;
  std::size_t hidden_width = 64;
  Activation activation = Activation::ReLU;
};

// A scoring function s(x) with a flat parameter vector so the
// optimizer never has to know the architecture.
//
// Linear:  params = [w (d), b],                 s = w.x + b
// Mlp1:    params = [W1 (h*d row major), b1 (h), w2 (h), b2],
//          s = w2.act(W1 x + b1) + b2
class Scorer {
 public:
  // Linear scorers start at zero; hidden-layer weights are drawn
  // uniformly from +-1/sqrt(fan_in) and biases start at zero.
  static Scorer make(const ScorerSpec& spec, Rng& rng);

  double score(const std::vector<double>& x) const;
  void score_batch(const std::vector<InstanceSample>& xs, std::vector<double>& out) const;

  // Adds upstream * d s(x)/d theta into grad (same length as params).
  void accumulate_score_grad(const std::vector<double>& x, double upstream,
                             std::vector<double>& grad) const;

  // score > threshold maps to +1, anything else (ties included) to -1.
  int predict(const std::vector<double>& x, double threshold = 0.0) const;

  const ScorerSpec& spec() const { return spec_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  std::string to_json() const;
  static Scorer from_json(const std::string& text);

 private:
  Scorer() = default;

  ScorerSpec spec_;
  std::vector<double> params_;
};

}  // namespace ntmp::model
