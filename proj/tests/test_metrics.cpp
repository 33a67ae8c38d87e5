#include <doctest.h>

#include <cmath>
#include <limits>

#include "cslm/metrics.hpp"
#include "cslm/random.hpp"
#include "cslm/training.hpp"

using cslm::BoolMatrix;
using cslm::Dataset;
using cslm::FittedModel;
using cslm::Matrix;
using cslm::NetworkConfig;
using cslm::Rng;
using cslm::Task;
using cslm::Vector;

namespace {

// constant-mode model with chosen coefficients and intercept
FittedModel constant_model(const Vector& beta, double intercept, double theta_hat = 0.0) {
  NetworkConfig config;
  config.p = beta.size();
  config.m = 2;
  config.hidden_layers = 0;
  FittedModel model;
  model.network = cslm::init_network(config);
  for (std::size_t j = 0; j < beta.size(); ++j) model.network.layers[0].bias[j] = beta[j];
  model.network.layers[0].bias[beta.size()] = intercept;
  model.theta_hat = theta_hat;
  return model;
}

Dataset dataset_from(const Matrix& X, const Vector& y) {
  Dataset data;
  data.X = X;
  data.Z = Matrix(X.rows(), 2, 0.5);
  data.y = y;
  for (std::size_t j = 0; j < X.cols(); ++j) data.x_names.push_back("x" + std::to_string(j + 1));
  data.z_names = {"z1", "z2"};
  return data;
}

}  // namespace

TEST_CASE("relative loss of the intercept-only model is exactly one") {
  Rng rng(1);
  Dataset train = dataset_from(Matrix(6, 2, 1.0), {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  for (double& v : train.X.values()) v = rng.uniform(-1.0, 1.0);
  Dataset test = dataset_from(Matrix(4, 2, 1.0), {2.0, 4.0, 1.0, 3.0});
  for (double& v : test.X.values()) v = rng.uniform(-1.0, 1.0);

  FittedModel model = constant_model({5.0, -3.0}, cslm::mean(train.y),
                                     std::numeric_limits<double>::max());
  model.baseline_response_mean = cslm::mean(train.y);
  CHECK(cslm::relative_loss(model, test, train) == 1.0);
  CHECK(cslm::relative_loss(model, test) == 1.0);
}

TEST_CASE("relative loss of perfect predictions is zero") {
  Rng rng(2);
  Matrix X(5, 2);
  for (double& v : X.values()) v = rng.uniform(-1.0, 1.0);
  const Vector beta = {0.7, -0.4};
  Vector y(5);
  for (std::size_t i = 0; i < 5; ++i) y[i] = 0.2 + X(i, 0) * beta[0] + X(i, 1) * beta[1];
  Dataset test = dataset_from(X, y);
  Dataset train = test;
  FittedModel model = constant_model(beta, 0.2);
  CHECK(cslm::relative_loss(model, test, train) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("relative loss matches hand arithmetic on four observations") {
  const Vector predictions = {1.5, 2.0, 2.5, 5.0};
  const Vector y_test = {1.0, 2.0, 3.0, 4.0};
  // model loss (0.25 + 0 + 0.25 + 1)/4 = 0.375; baseline vs mean 2: 1.5
  const double got =
      cslm::relative_loss_from_predictions(Task::regression, predictions, y_test, 2.0);
  CHECK(got == doctest::Approx(0.375 / 1.5).epsilon(1e-12));
}

TEST_CASE("relative loss guards the degenerate baseline") {
  const Vector flat = {2.0, 2.0, 2.0};
  CHECK(cslm::relative_loss_from_predictions(Task::regression, flat, flat, 2.0) == 0.0);
  CHECK_THROWS_AS(
      cslm::relative_loss_from_predictions(Task::regression, {1.0, 1.0, 1.0}, flat, 2.0),
      std::invalid_argument);
}

TEST_CASE("selection F1 formula cases") {
  BoolMatrix truth(3, 4);
  BoolMatrix pred(3, 4);
  // prediction == truth -> 1
  truth.set(0, 0, true);
  truth.set(1, 2, true);
  pred.set(0, 0, true);
  pred.set(1, 2, true);
  CHECK(cslm::selection_f1(pred, truth) == 1.0);

  // complement of a nonempty truth -> 0
  BoolMatrix comp(3, 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) comp.set(i, j, !truth(i, j));
  CHECK(cslm::selection_f1(comp, truth) == 0.0);

  // TP=8, FP=2, FN=2 -> 0.8
  BoolMatrix t2(1, 12), p2(1, 12);
  for (std::size_t j = 0; j < 10; ++j) t2.set(0, j, true);   // 10 true
  for (std::size_t j = 0; j < 8; ++j) p2.set(0, j, true);    // 8 hits
  p2.set(0, 10, true);                                        // 2 false positives
  p2.set(0, 11, true);
  CHECK(cslm::selection_f1(p2, t2) == doctest::Approx(0.8));

  // empty truth conventions
  BoolMatrix none(2, 3), some(2, 3);
  CHECK(cslm::selection_f1(BoolMatrix(2, 3), none) == 1.0);
  some.set(0, 0, true);
  CHECK(cslm::selection_f1(some, none) == 0.0);

  CHECK_THROWS_AS(cslm::selection_f1(BoolMatrix(2, 2), BoolMatrix(2, 3)),
                  std::invalid_argument);
}

TEST_CASE("per-observation F1 averages row scores") {
  BoolMatrix truth(2, 2), pred(2, 2);
  truth.set(0, 0, true);
  pred.set(0, 0, true);  // row 0 perfect -> 1
  truth.set(1, 0, true);
  pred.set(1, 1, true);  // row 1 disjoint -> 0
  CHECK(cslm::selection_f1(pred, truth, cslm::F1Mode::per_observation) == doctest::Approx(0.5));
  // pooled differs: TP=1, FP=1, FN=1 -> 2/4
  CHECK(cslm::selection_f1(pred, truth, cslm::F1Mode::pooled) == doctest::Approx(0.5));
  pred.set(1, 1, false);
  pred.set(1, 0, true);
  CHECK(cslm::selection_f1(pred, truth, cslm::F1Mode::per_observation) == 1.0);
}

TEST_CASE("metrics are invariant under observation permutation") {
  Rng rng(3);
  BoolMatrix truth(6, 4), pred(6, 4);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      truth.set(i, j, rng.uniform01() < 0.4);
      pred.set(i, j, rng.uniform01() < 0.4);
    }
  BoolMatrix truth_rev(6, 4), pred_rev(6, 4);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      truth_rev.set(5 - i, j, truth(i, j));
      pred_rev.set(5 - i, j, pred(i, j));
    }
  CHECK(cslm::selection_f1(pred, truth) == cslm::selection_f1(pred_rev, truth_rev));
  CHECK(cslm::hamming_distance_scaled(pred, truth) ==
        cslm::hamming_distance_scaled(pred_rev, truth_rev));
  CHECK(cslm::sparsity_of(pred).first == cslm::sparsity_of(pred_rev).first);
}

TEST_CASE("sparsity counts nonzero coefficients per observation") {
  // lambda = 0 style model: everything thresholded away
  Rng rng(4);
  Dataset data = dataset_from(Matrix(5, 3, 1.0), Vector(5, 0.0));
  for (double& v : data.X.values()) v = rng.uniform(-1.0, 1.0);
  FittedModel nullmodel =
      constant_model({1.0, -2.0, 3.0}, 0.0, std::numeric_limits<double>::max());
  const auto [count0, prop0] = cslm::sparsity(nullmodel, data);
  CHECK(count0 == 0.0);
  CHECK(prop0 == 0.0);

  // dense model: no thresholding, all coefficients nonzero
  FittedModel dense = constant_model({1.0, -2.0, 3.0}, 0.0, 0.0);
  const auto [count1, prop1] = cslm::sparsity(dense, data);
  CHECK(count1 == 3.0);
  CHECK(prop1 == 1.0);

  // half dense, half empty
  BoolMatrix half(4, 4);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) half.set(i, j, true);
  const auto [count2, prop2] = cslm::sparsity_of(half);
  CHECK(count2 == 2.0);
  CHECK(prop2 == 0.5);

  // proportion equals the mean of per-row proportions
  double per_row = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < 4; ++j) c += half(i, j);
    per_row += static_cast<double>(c) / 4.0;
  }
  CHECK(prop2 == doctest::Approx(per_row / 4.0));
}

TEST_CASE("hamming instability: identity, complement, one column") {
  Rng rng(5);
  Dataset data = dataset_from(Matrix(8, 10, 1.0), Vector(8, 0.0));
  for (double& v : data.X.values()) v = rng.uniform(-1.0, 1.0);

  Vector beta(10);
  for (double& v : beta) v = rng.uniform(0.5, 1.5);
  FittedModel a = constant_model(beta, 0.0, 0.0);
  CHECK(cslm::hamming_instability(a, a, data) == 0.0);

  BoolMatrix sa(4, 10), sb(4, 10);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 10; ++j) {
      sa.set(i, j, (i + j) % 2 == 0);
      sb.set(i, j, (i + j) % 2 == 1);
    }
  CHECK(cslm::hamming_distance_scaled(sa, sb) == 1.0);

  BoolMatrix sc = sa;
  for (std::size_t i = 0; i < 4; ++i) sc.set(i, 0, !sa(i, 0));
  CHECK(cslm::hamming_distance_scaled(sa, sc) == doctest::Approx(0.1));
  CHECK(cslm::hamming_distance_scaled(sc, sa) == doctest::Approx(0.1));  // symmetric
}
