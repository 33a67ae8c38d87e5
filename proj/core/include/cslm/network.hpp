#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cslm/matrix.hpp"

namespace cslm {

// Architecture of the coefficient network eta(z). hidden_layers == 0 is the
// constant-coefficient mode: a single bias-only output layer, so the fit
// degenerates to an ordinary (constant) lasso.
struct NetworkConfig {
  std::size_t p = 0;              // explanatory features / coefficient outputs
  std::size_t m = 0;              // contextual inputs
  std::size_t hidden_layers = 3;
  std::size_t width = 0;          // 0 = size from the 32*p*m parameter budget
  bool include_intercept = true;
  std::uint64_t seed = 0;

  std::size_t outputs() const { return p + (include_intercept ? 1 : 0); }

  // Hidden width actually used: `width` when set, otherwise the rounded
  // positive root of (h-1) d^2 + (m + outputs + h) d + outputs = 32 p m.
  // Throws when the sizing is infeasible (d would round to 0).
  std::size_t resolved_width() const;
};

struct Layer {
  Matrix weights;  // out x in; in == 0 for the bias-only constant mode
  Vector bias;
};

struct NetworkModel {
  NetworkConfig config;
  std::vector<Layer> layers;

  std::size_t parameter_count() const;
};

// Gradient (or optimizer moment) record with the same layout as the layers.
using Gradients = std::vector<Layer>;

// Deterministic initialization: weights uniform on +-sqrt(6/(fan_in+fan_out)),
// biases zero, drawn layer by layer in row-major order from the config seed.
NetworkModel init_network(const NetworkConfig& config);

Gradients zero_gradients(const NetworkModel& model);

// Everything backward needs from one forward pass.
struct ForwardTape {
  Matrix input;                       // n x m
  std::vector<Matrix> hidden_pre;     // pre-activations per hidden layer
  std::vector<Matrix> hidden_act;     // rectified activations per hidden layer
};

struct ForwardResult {
  Matrix coefficients;  // n x p, the dense eta rows
  Vector intercept;     // n, empty when the model has no intercept output
};

ForwardResult forward(const NetworkModel& model, const Matrix& Z);
ForwardResult forward(const NetworkModel& model, const Matrix& Z, ForwardTape& tape);

// Reverse mode for the scalar objective whose sensitivities w.r.t. the dense
// coefficients and intercept outputs are given. ReLU subgradient at 0 is 0.
Gradients backward(const NetworkModel& model, const ForwardTape& tape,
                   const Matrix& grad_coefficients, const Vector& grad_intercept);

}  // namespace cslm
