#pragma once

// Training-loop internals shared by the tuple trainer and the
// baseline trainers: the optimizer stepper, mini-batch index draws,
// and the divergence guard.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntmp/core.hpp"
#include "ntmp/model.hpp"
#include "ntmp/train.hpp"

namespace ntmp::model::detail {

// Adam with the standard (0.9, 0.999, 1e-8) constants; weight decay
// enters as an L2 term on the gradient for both optimizers.
class OptimizerState {
 public:
  OptimizerState(Optimizer kind, std::size_t n_params, double lr, double wd)
      : kind_(kind), lr_(lr), wd_(wd), m_(n_params, 0.0), v_(n_params, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    if (kind_ == Optimizer::Sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= lr_ * (grad[i] + wd_ * params[i]);
      }
      return;
    }
    ++t_;
    double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      double g = grad[i] + wd_ * params[i];
      m_[i] = 0.9 * m_[i] + 0.1 * g;
      v_[i] = 0.999 * v_[i] + 0.001 * g * g;
      params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + 1e-8);
    }
  }

 private:
  Optimizer kind_;
  double lr_;
  double wd_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

inline void check_finite_params(const Scorer& scorer, int epoch) {
  for (double p : scorer.params()) {
    if (!std::isfinite(p)) {
      throw std::runtime_error("training diverged: non-finite parameter at epoch " +
                               std::to_string(epoch) + "; lower the learning rate or weight decay");
    }
  }
}

// Draws k distinct entries from idx (partial Fisher-Yates on a
// persistent scratch vector, so successive batches stay cheap).
inline std::vector<std::size_t> sample_distinct(std::vector<std::size_t>& scratch, std::size_t k,
                                                Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.below(scratch.size() - i);
    std::swap(scratch[i], scratch[j]);
  }
  return {scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k)};
}

}  // namespace ntmp::model::detail
