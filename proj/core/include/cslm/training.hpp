#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cslm/data.hpp"
#include "cslm/model.hpp"
#include "cslm/network.hpp"
#include "cslm/projection.hpp"

namespace cslm {

struct OptimizerConfig {
  double learning_rate = 0.001;
  std::size_t patience = 30;      // epochs without validation improvement
  std::size_t max_epochs = 2000;  // safety cap
  std::size_t batch_size = 0;     // 0 = full batch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;  // minibatch order when batch_size > 0

  void validate() const;
};

struct PathConfig {
  std::size_t lambda_count = 50;  // T
};

// Mean loss over the batch from the linear predictor. Classification uses the
// logit-space form; the probability-space formula overflows.
double mean_loss(Task task, const Vector& linear_pred, const Vector& y);
// d(mean loss)/d(linear_pred), length n.
Vector loss_gradient(Task task, const Vector& linear_pred, const Vector& y);

struct ObjectiveValue {
  double loss = 0.0;
  double theta = 0.0;  // training-time threshold of this batch (0 if unconstrained)
  Gradients gradients;
};

// Training objective at one batch: forward, optional sign clipping, the
// (group) l1 projection at `lambda`, mean loss, and full reverse-mode
// parameter gradients. lambda may be +infinity to disable the projection.
ObjectiveValue training_loss(const NetworkModel& model, const Dataset& batch, double lambda,
                             const std::optional<GroupStructure>& groups = {},
                             const std::optional<SignConstraints>& signs = {});

// Threshold frozen for inference: one full-batch projection pass over the
// training set. 0 when lambda is infinite; DBL_MAX at lambda == 0 so every
// inference coefficient is exactly zero.
double compute_theta(const NetworkModel& model, const Dataset& train, double lambda,
                     const std::optional<GroupStructure>& groups = {},
                     const std::optional<SignConstraints>& signs = {});

// Hold-out loss with inference thresholding at `theta`.
double holdout_loss(const NetworkModel& model, const Dataset& data, double theta,
                    const std::optional<GroupStructure>& groups = {},
                    const std::optional<SignConstraints>& signs = {});

// Adam with validation-based early stopping. Returns the best-validation
// iterate (the warm start itself counts as epoch 0), with theta_hat from a
// final full-batch pass. Throws, naming the epoch, if the loss turns
// nonfinite.
FittedModel fit_single(const Dataset& train, const Dataset& val, double lambda,
                       const NetworkModel& init_weights, const OptimizerConfig& opt,
                       const std::optional<GroupStructure>& groups = {},
                       const std::optional<SignConstraints>& signs = {});

struct PathResult {
  Vector lambdas;                  // strictly decreasing, last value 0
  std::vector<FittedModel> models; // one per lambda, in grid order
};

// Pathwise fitting: an unregularized fit pins lambda_1 at its mean training
// norm, the grid is linearly spaced down to 0, and every subsequent fit warm
// starts from the previous weights.
PathResult fit_path(const Dataset& train, const Dataset& val, const NetworkConfig& net_config,
                    const PathConfig& path_config, const OptimizerConfig& opt,
                    const std::optional<GroupStructure>& groups = {},
                    const std::optional<SignConstraints>& signs = {});

// Relaxed fit: trains the polished network against the frozen support mask
// and tunes gamma over {0, 0.1, ..., 1} on the validation set. Updates the
// model's polished weights, gamma, and validation_loss in place.
void relax(FittedModel& model, const Dataset& train, const Dataset& val,
           const OptimizerConfig& opt);

// Index of the validation-loss minimizer; ties go to the larger lambda.
std::size_t select_index(const PathResult& path);
const FittedModel& select_model(const PathResult& path);

}  // namespace cslm
