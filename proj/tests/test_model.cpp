#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ntmp/model.hpp"

using namespace ntmp;
using namespace ntmp::model;

namespace {

Scorer make_fixed_mlp(Activation act) {
  ScorerSpec spec;
  spec.kind = ScorerKind::Mlp1;
  spec.input_dim = 2;
  spec.hidden_width = 2;
  spec.activation = act;
  Rng rng(RngSeed{0});
  auto s = Scorer::make(spec, rng);
  // W1 = [[1, 2], [3, 4]], b1 = [0.5, -0.5], w2 = [1, -1], b2 = 0.25
  s.params() = {1.0, 2.0, 3.0, 4.0, 0.5, -0.5, 1.0, -1.0, 0.25};
  return s;
}

double numeric_grad(Scorer& s, const std::vector<double>& x, std::size_t p) {
  const double h = 1e-6;
  double orig = s.params()[p];
  s.params()[p] = orig + h;
  double up = s.score(x);
  s.params()[p] = orig - h;
  double down = s.score(x);
  s.params()[p] = orig;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("linear scorer forward and gradient") {
  ScorerSpec spec;
  spec.kind = ScorerKind::Linear;
  spec.input_dim = 3;
  Rng rng(RngSeed{1});
  auto s = Scorer::make(spec, rng);
  CHECK(s.param_count() == 4);
  for (double p : s.params()) CHECK(p == 0.0);

  s.params() = {2.0, -1.0, 0.5, 0.25};
  std::vector<double> x = {1.0, 4.0, -2.0};
  CHECK(s.score(x) == doctest::Approx(2.0 - 4.0 - 1.0 + 0.25).epsilon(1e-15));

  std::vector<double> grad(4, 0.0);
  s.accumulate_score_grad(x, 2.0, grad);
  CHECK(grad == std::vector<double>{2.0, 8.0, -4.0, 2.0});
}

TEST_CASE("mlp forward matches hand computation") {
  auto relu = make_fixed_mlp(Activation::ReLU);
  // x = (1, -1): z1 = (-0.5, -1.5), both clipped to zero, s = b2.
  CHECK(relu.score({1.0, -1.0}) == doctest::Approx(0.25).epsilon(1e-15));
  // x = (1, 1): z1 = (3.5, 6.5), s = 3.5 - 6.5 + 0.25 = -2.75.
  CHECK(relu.score({1.0, 1.0}) == doctest::Approx(-2.75).epsilon(1e-15));

  auto tanh_net = make_fixed_mlp(Activation::Tanh);
  double expected = std::tanh(-0.5) - std::tanh(-1.5) + 0.25;
  CHECK(tanh_net.score({1.0, -1.0}) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("analytic gradients match central differences") {
  std::vector<std::vector<double>> points = {
      {1.0, -1.0}, {0.3, 0.7}, {-2.0, 1.5}, {0.0, 0.0}};
  for (Activation act : {Activation::ReLU, Activation::Tanh}) {
    ScorerSpec spec;
    spec.kind = ScorerKind::Mlp1;
    spec.input_dim = 2;
    spec.hidden_width = 5;
    spec.activation = act;
    Rng rng(RngSeed{17});
    auto s = Scorer::make(spec, rng);
    // Move every parameter off zero so no ReLU pre-activation sits
    // exactly on the kink, where central differences are one-sided.
    for (auto& p : s.params()) p = rng.uniform(0.05, 0.6) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    for (const auto& x : points) {
      std::vector<double> grad(s.param_count(), 0.0);
      s.accumulate_score_grad(x, 1.0, grad);
      for (std::size_t p = 0; p < s.param_count(); ++p) {
        CHECK(grad[p] == doctest::Approx(numeric_grad(s, x, p)).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("gradient accumulation adds instead of overwriting") {
  ScorerSpec spec;
  spec.kind = ScorerKind::Linear;
  spec.input_dim = 2;
  Rng rng(RngSeed{2});
  auto s = Scorer::make(spec, rng);
  std::vector<double> grad(3, 0.0);
  s.accumulate_score_grad({1.0, 2.0}, 1.0, grad);
  s.accumulate_score_grad({1.0, 2.0}, 1.0, grad);
  CHECK(grad == std::vector<double>{2.0, 4.0, 2.0});
}

TEST_CASE("mlp initialization ranges") {
  ScorerSpec spec;
  spec.kind = ScorerKind::Mlp1;
  spec.input_dim = 4;
  spec.hidden_width = 64;
  Rng rng(RngSeed{3});
  auto s = Scorer::make(spec, rng);
  std::size_t d = 4, h = 64;
  double bound1 = 1.0 / std::sqrt(4.0);
  double bound2 = 1.0 / std::sqrt(64.0);
  for (std::size_t i = 0; i < h * d; ++i) {
    CHECK(std::abs(s.params()[i]) <= bound1);
  }
  for (std::size_t j = 0; j < h; ++j) {
    CHECK(s.params()[h * d + j] == 0.0);                          // b1
    CHECK(std::abs(s.params()[h * d + h + j]) <= bound2);         // w2
  }
  CHECK(s.params()[h * d + 2 * h] == 0.0);                        // b2

  // Not all weights identical (the draw really happened).
  CHECK(s.params()[0] != s.params()[1]);

  Rng rng2(RngSeed{3});
  auto s2 = Scorer::make(spec, rng2);
  CHECK(s.params() == s2.params());
}

TEST_CASE("prediction thresholding breaks ties toward the negative class") {
  ScorerSpec spec;
  spec.kind = ScorerKind::Linear;
  spec.input_dim = 1;
  Rng rng(RngSeed{4});
  auto s = Scorer::make(spec, rng);
  s.params() = {1.0, 0.0};
  CHECK(s.predict({0.5}) == 1);
  CHECK(s.predict({-0.5}) == -1);
  CHECK(s.predict({0.0}) == -1);
  CHECK(s.predict({0.5}, 0.5) == -1);
  CHECK(s.predict({0.6}, 0.5) == 1);
}

TEST_CASE("json round trip preserves parameters exactly") {
  ScorerSpec spec;
  spec.kind = ScorerKind::Mlp1;
  spec.input_dim = 3;
  spec.hidden_width = 8;
  spec.activation = Activation::Tanh;
  Rng rng(RngSeed{5});
  auto s = Scorer::make(spec, rng);
  s.params()[0] = 0.1234567890123456789;

  auto back = Scorer::from_json(s.to_json());
  CHECK(back.spec().kind == ScorerKind::Mlp1);
  CHECK(back.spec().input_dim == 3);
  CHECK(back.spec().hidden_width == 8);
  CHECK(back.spec().activation == Activation::Tanh);
  REQUIRE(back.param_count() == s.param_count());
  for (std::size_t i = 0; i < s.param_count(); ++i) {
    CHECK(back.params()[i] == s.params()[i]);
  }
  CHECK(back.score({0.1, 0.2, 0.3}) == s.score({0.1, 0.2, 0.3}));
}

TEST_CASE("input dimension mismatches are rejected") {
  ScorerSpec spec;
  spec.kind = ScorerKind::Linear;
  spec.input_dim = 2;
  Rng rng(RngSeed{6});
  auto s = Scorer::make(spec, rng);
  CHECK_THROWS_AS(s.score({1.0}), std::invalid_argument);
  std::vector<double> grad(3, 0.0);
  CHECK_THROWS_AS(s.accumulate_score_grad({1.0, 2.0, 3.0}, 1.0, grad), std::invalid_argument);
  std::vector<double> small(2, 0.0);
  CHECK_THROWS_AS(s.accumulate_score_grad({1.0, 2.0}, 1.0, small), std::invalid_argument);
}
