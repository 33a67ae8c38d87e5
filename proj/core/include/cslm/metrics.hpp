#pragma once

#include <optional>

#include "cslm/data.hpp"
#include "cslm/model.hpp"

namespace cslm {

struct EvaluationReport {
  double relative_loss = 0.0;
  double avg_sparsity_count = 0.0;
  double avg_sparsity_proportion = 0.0;
  std::optional<double> f1;
  std::optional<double> hamming_instability;
};

// Mean test loss divided by the loss of the intercept-only model fitted on
// the training response (mean for regression, base rate for classification).
double relative_loss(const FittedModel& model, const Dataset& test, const Dataset& train);
// Same, with the baseline taken from the model's stored training mean.
double relative_loss(const FittedModel& model, const Dataset& test);
// Raw-ingredient form used by the others.
double relative_loss_from_predictions(Task task, const Vector& linear_pred, const Vector& y_test,
                                      double train_response_mean);

enum class F1Mode { pooled, per_observation };

// F1 of the selected cells. Pooled counts TP/FP/FN over every (i, j) cell;
// per_observation averages row-wise F1 scores. Empty truth and empty
// prediction score 1.
double selection_f1(const BoolMatrix& predicted, const BoolMatrix& truth,
                    F1Mode mode = F1Mode::pooled);

// Mean number of nonzero (non-intercept) coefficients per observation and the
// same divided by p.
std::pair<double, double> sparsity(const FittedModel& model, const Dataset& data);
std::pair<double, double> sparsity_of(const BoolMatrix& support);

// Mean fraction of support cells on which two fits disagree.
double hamming_instability(const FittedModel& a, const FittedModel& b, const Dataset& data);
double hamming_distance_scaled(const BoolMatrix& a, const BoolMatrix& b);

// Support pattern of a model on (raw) data, standardizing as needed.
BoolMatrix model_support(const FittedModel& model, const Dataset& data);

}  // namespace cslm
