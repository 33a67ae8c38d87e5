#include "cslm/model.hpp"

#include <cmath>

namespace cslm {

namespace {

Matrix standardized_matrix(const Matrix& M, const Vector& means, const Vector& sds) {
  require(M.cols() == means.size(), "predict: column count does not match the standardizer");
  Matrix out = M;
  for (std::size_t j = 0; j < out.cols(); ++j)
    for (std::size_t i = 0; i < out.rows(); ++i) out(i, j) = (out(i, j) - means[j]) / sds[j];
  return out;
}

// Dense network outputs with sign constraints already applied.
ForwardResult constrained_forward(const NetworkModel& net, const FittedModel& model,
                                  const Matrix& Z_std) {
  ForwardResult res = forward(net, Z_std);
  if (model.signs && !model.signs->empty())
    res.coefficients = clip_signs(res.coefficients, *model.signs);
  return res;
}

Matrix thresholded(const FittedModel& model, const Matrix& dense) {
  if (model.groups) return soft_threshold_grouped(dense, *model.groups, model.theta_hat);
  return soft_threshold(dense, model.theta_hat);
}

}  // namespace

CoefficientMatrix inference_coefficients(const FittedModel& model, const Matrix& Z_std) {
  ForwardResult base = constrained_forward(model.network, model, Z_std);
  Matrix coeffs = thresholded(model, base.coefficients);
  Vector intercept = std::move(base.intercept);

  if (model.gamma > 0.0 && model.polished) {
    ForwardResult pol = constrained_forward(*model.polished, model, Z_std);
    const double g = model.gamma;
    for (std::size_t i = 0; i < coeffs.rows(); ++i) {
      for (std::size_t j = 0; j < coeffs.cols(); ++j) {
        const double b = coeffs(i, j);
        // the polished coefficient only exists on the original support
        coeffs(i, j) = b == 0.0 ? 0.0 : (1.0 - g) * b + g * pol.coefficients(i, j);
      }
    }
    for (std::size_t i = 0; i < intercept.size(); ++i)
      intercept[i] = (1.0 - g) * intercept[i] + g * pol.intercept[i];
  }

  CoefficientMatrix out;
  out.values = std::move(coeffs);
  out.intercept = std::move(intercept);
  return out;
}

BoolMatrix support_pattern(const FittedModel& model, const Matrix& Z_std) {
  ForwardResult base = constrained_forward(model.network, model, Z_std);
  const Matrix coeffs = thresholded(model, base.coefficients);
  BoolMatrix mask(coeffs.rows(), coeffs.cols());
  for (std::size_t i = 0; i < coeffs.rows(); ++i)
    for (std::size_t j = 0; j < coeffs.cols(); ++j) mask.set(i, j, coeffs(i, j) != 0.0);
  return mask;
}

Vector predict_linear_standardized(const FittedModel& model, const Matrix& X_std,
                                   const Matrix& Z_std) {
  require(X_std.rows() == Z_std.rows(), "predict: X and Z row counts differ");
  require(X_std.all_finite() && Z_std.all_finite(), "predict: nonfinite input");
  const CoefficientMatrix cm = inference_coefficients(model, Z_std);
  require(cm.values.cols() == X_std.cols(), "predict: explanatory column count mismatch");
  Vector yhat(X_std.rows(), 0.0);
  for (std::size_t i = 0; i < X_std.rows(); ++i) {
    const double* x = X_std.row(i);
    const double* b = cm.values.row(i);
    double s = cm.intercept.empty() ? 0.0 : cm.intercept[i];
    for (std::size_t j = 0; j < X_std.cols(); ++j) s += x[j] * b[j];
    yhat[i] = s;
  }
  return yhat;
}

Vector predict_linear(const FittedModel& model, const Matrix& X, const Matrix& Z) {
  if (!model.standardizer) return predict_linear_standardized(model, X, Z);
  const Standardizer& s = *model.standardizer;
  return predict_linear_standardized(model, standardized_matrix(X, s.x_means, s.x_sds),
                                     standardized_matrix(Z, s.z_means, s.z_sds));
}

Vector predict(const FittedModel& model, const Matrix& X, const Matrix& Z) {
  Vector f = predict_linear(model, X, Z);
  if (model.task == Task::classification)
    for (double& v : f) v = 1.0 / (1.0 + std::exp(-v));
  return f;
}

}  // namespace cslm
