#pragma once

#include <optional>

#include "cslm/data.hpp"
#include "cslm/matrix.hpp"
#include "cslm/network.hpp"
#include "cslm/projection.hpp"
#include "cslm/types.hpp"

namespace cslm {

// A trained model at one (lambda, gamma) point: the coefficient network, the
// frozen inference threshold, the optional polished companion from the
// relaxed fit, and everything needed to reproduce predictions.
struct FittedModel {
  Task task = Task::regression;
  NetworkModel network;
  std::optional<NetworkModel> polished;
  double theta_hat = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  std::optional<GroupStructure> groups;
  std::optional<SignConstraints> signs;
  std::optional<Standardizer> standardizer;
  double baseline_response_mean = 0.0;  // training-set mean response (base rate)
  double validation_loss = 0.0;
  std::size_t epochs_trained = 0;  // diagnostic, not persisted
};

// Inference coefficients on the standardized scale: clip (if constrained),
// threshold with theta_hat (group-aware), then blend with the masked polished
// network when gamma > 0.
CoefficientMatrix inference_coefficients(const FittedModel& model, const Matrix& Z_std);

// Nonzero pattern of the gamma = 0 coefficients; invariant across gamma.
BoolMatrix support_pattern(const FittedModel& model, const Matrix& Z_std);

// Linear predictor x' beta(z) + intercept on already-standardized inputs.
Vector predict_linear_standardized(const FittedModel& model, const Matrix& X_std,
                                   const Matrix& Z_std);

// Raw-input prediction; applies the stored standardizer when present. For
// classification the linear predictor is passed through the inverse logit.
Vector predict_linear(const FittedModel& model, const Matrix& X, const Matrix& Z);
Vector predict(const FittedModel& model, const Matrix& X, const Matrix& Z);

}  // namespace cslm
