#include "cslm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cslm/training.hpp"

namespace cslm {

namespace {

constexpr double kDegenerate = 1e-12;

double clamped_logit(double prob) {
  const double eps = 1e-15;
  const double q = std::min(1.0 - eps, std::max(eps, prob));
  return std::log(q / (1.0 - q));
}

}  // namespace

double relative_loss_from_predictions(Task task, const Vector& linear_pred, const Vector& y_test,
                                      double train_response_mean) {
  const double model_loss = mean_loss(task, linear_pred, y_test);
  double base;
  if (task == Task::regression) {
    base = train_response_mean;
  } else {
    base = clamped_logit(train_response_mean);
  }
  const Vector baseline(y_test.size(), base);
  const double baseline_loss = mean_loss(task, baseline, y_test);
  if (baseline_loss < kDegenerate) {
    if (model_loss < kDegenerate) return 0.0;
    throw std::invalid_argument("relative_loss: degenerate intercept-only baseline");
  }
  return model_loss / baseline_loss;
}

double relative_loss(const FittedModel& model, const Dataset& test, const Dataset& train) {
  test.validate();
  train.validate();
  return relative_loss_from_predictions(model.task, predict_linear(model, test.X, test.Z),
                                        test.y, mean(train.y));
}

double relative_loss(const FittedModel& model, const Dataset& test) {
  test.validate();
  return relative_loss_from_predictions(model.task, predict_linear(model, test.X, test.Z),
                                        test.y, model.baseline_response_mean);
}

double selection_f1(const BoolMatrix& predicted, const BoolMatrix& truth, F1Mode mode) {
  require(predicted.rows() == truth.rows() && predicted.cols() == truth.cols(),
          "selection_f1: shape mismatch");
  auto f1_of = [](std::size_t tp, std::size_t fp, std::size_t fn) {
    if (tp + fp + fn == 0) return 1.0;  // empty truth, empty prediction
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  };
  if (mode == F1Mode::pooled) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.rows(); ++i)
      for (std::size_t j = 0; j < truth.cols(); ++j) {
        const bool hit = predicted(i, j);
        const bool real = truth(i, j);
        tp += hit && real;
        fp += hit && !real;
        fn += !hit && real;
      }
    return f1_of(tp, fp, fn);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t j = 0; j < truth.cols(); ++j) {
      const bool hit = predicted(i, j);
      const bool real = truth(i, j);
      tp += hit && real;
      fp += hit && !real;
      fn += !hit && real;
    }
    total += f1_of(tp, fp, fn);
  }
  return total / static_cast<double>(truth.rows());
}

std::pair<double, double> sparsity_of(const BoolMatrix& support) {
  require(support.rows() >= 1 && support.cols() >= 1, "sparsity: empty support");
  const double avg = static_cast<double>(support.count()) / static_cast<double>(support.rows());
  return {avg, avg / static_cast<double>(support.cols())};
}

BoolMatrix model_support(const FittedModel& model, const Dataset& data) {
  data.validate();
  Matrix Z = data.Z;
  if (model.standardizer) {
    const Standardizer& s = *model.standardizer;
    require(Z.cols() == s.z_means.size(), "model_support: contextual column mismatch");
    for (std::size_t j = 0; j < Z.cols(); ++j)
      for (std::size_t i = 0; i < Z.rows(); ++i) Z(i, j) = (Z(i, j) - s.z_means[j]) / s.z_sds[j];
  }
  return support_pattern(model, Z);
}

std::pair<double, double> sparsity(const FittedModel& model, const Dataset& data) {
  return sparsity_of(model_support(model, data));
}

double hamming_distance_scaled(const BoolMatrix& a, const BoolMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hamming: shape mismatch");
  std::size_t disagreements = 0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) disagreements += a(i, j) != b(i, j);
  return static_cast<double>(disagreements) /
         (static_cast<double>(a.rows()) * static_cast<double>(a.cols()));
}

double hamming_instability(const FittedModel& a, const FittedModel& b, const Dataset& data) {
  require(a.network.config.p == b.network.config.p, "hamming_instability: p mismatch");
  return hamming_distance_scaled(model_support(a, data), model_support(b, data));
}

}  // namespace cslm
