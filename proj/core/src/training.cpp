#include "cslm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cslm/random.hpp"

namespace cslm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector linear_predictor(const Matrix& X, const Matrix& coeffs, const Vector& intercept) {
  Vector f(X.rows(), 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double* x = X.row(i);
    const double* b = coeffs.row(i);
    double s = intercept.empty() ? 0.0 : intercept[i];
    for (std::size_t j = 0; j < X.cols(); ++j) s += x[j] * b[j];
    f[i] = s;
  }
  return f;
}

struct AdamState {
  Gradients first, second;
  std::size_t step = 0;
};

AdamState make_adam(const NetworkModel& model) {
  return {zero_gradients(model), zero_gradients(model), 0};
}

void adam_update(NetworkModel& model, AdamState& state, const Gradients& grads,
                 const OptimizerConfig& opt) {
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto step_param = [&](double& w, double& m, double& v, double g) {
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
      w -= opt.learning_rate * (m / c1) / (std::sqrt(v / c2) + opt.epsilon);
    };
    auto& wl = model.layers[l];
    auto& ml = state.first[l];
    auto& vl = state.second[l];
    for (std::size_t k = 0; k < wl.weights.size(); ++k)
      step_param(wl.weights.data()[k], ml.weights.data()[k], vl.weights.data()[k],
                 grads[l].weights.data()[k]);
    for (std::size_t k = 0; k < wl.bias.size(); ++k)
      step_param(wl.bias[k], ml.bias[k], vl.bias[k], grads[l].bias[k]);
  }
}

void check_pair(const Dataset& train, const Dataset& val) {
  train.validate();
  val.validate();
  require(train.p() == val.p() && train.m() == val.m(),
          "fit: training and validation shapes differ");
  require(train.task == val.task, "fit: training and validation tasks differ");
}

[[noreturn]] void diverged(const char* where, std::size_t epoch) {
  throw std::runtime_error(std::string(where) + ": training diverged (nonfinite loss) at epoch " +
                           std::to_string(epoch));
}

}  // namespace

void OptimizerConfig::validate() const {
  require(learning_rate > 0.0, "optimizer: learning rate must be positive");
  require(patience >= 1, "optimizer: patience must be at least 1");
  require(max_epochs >= 1, "optimizer: max_epochs must be at least 1");
}

double mean_loss(Task task, const Vector& linear_pred, const Vector& y) {
  require(linear_pred.size() == y.size() && !y.empty(), "mean_loss: size mismatch or empty");
  const double n = static_cast<double>(y.size());
  double total = 0.0;
  if (task == Task::regression) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = y[i] - linear_pred[i];
      total += r * r;
    }
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double f = linear_pred[i];
      total += std::max(f, 0.0) - y[i] * f + std::log1p(std::exp(-std::abs(f)));
    }
  }
  return total / n;
}

Vector loss_gradient(Task task, const Vector& linear_pred, const Vector& y) {
  require(linear_pred.size() == y.size() && !y.empty(), "loss_gradient: size mismatch or empty");
  const double n = static_cast<double>(y.size());
  Vector g(y.size());
  if (task == Task::regression) {
    for (std::size_t i = 0; i < y.size(); ++i)
      g[i] = 2.0 * (linear_pred[i] - y[i]) / n;
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double sigma = 1.0 / (1.0 + std::exp(-linear_pred[i]));
      g[i] = (sigma - y[i]) / n;
    }
  }
  return g;
}

ObjectiveValue training_loss(const NetworkModel& model, const Dataset& batch, double lambda,
                             const std::optional<GroupStructure>& groups,
                             const std::optional<SignConstraints>& signs) {
  require(batch.n() >= 1, "training_loss: empty batch");
  require(lambda >= 0.0, "training_loss: negative lambda");
  require(batch.p() == model.config.p && batch.m() == model.config.m,
          "training_loss: batch shape does not match the model");

  ForwardTape tape;
  ForwardResult fr = forward(model, batch.Z, tape);
  const bool clip = signs && !signs->empty();
  Matrix clipped = clip ? clip_signs(fr.coefficients, *signs) : fr.coefficients;

  Matrix projected;
  ProjectionState state;
  double theta = 0.0;
  const bool unconstrained = std::isinf(lambda);
  if (unconstrained) {
    projected = clipped;
  } else if (groups) {
    ProjectionResult pr = project_group(clipped, *groups, lambda);
    projected = std::move(pr.coefficients);
    state = std::move(pr.state);
    theta = state.theta;
  } else {
    ProjectionResult pr = project_l1(clipped, lambda);
    projected = std::move(pr.coefficients);
    state = std::move(pr.state);
    theta = state.theta;
  }

  const Vector f = linear_predictor(batch.X, projected, fr.intercept);
  ObjectiveValue out;
  out.loss = mean_loss(batch.task, f, batch.y);
  out.theta = theta;

  const Vector gf = loss_gradient(batch.task, f, batch.y);
  Matrix grad_proj(batch.n(), batch.p());
  for (std::size_t i = 0; i < batch.n(); ++i) {
    const double* x = batch.X.row(i);
    double* g = grad_proj.row(i);
    for (std::size_t j = 0; j < batch.p(); ++j) g[j] = gf[i] * x[j];
  }
  Vector grad_intercept;
  if (model.config.include_intercept) grad_intercept = gf;

  Matrix grad_clipped;
  if (unconstrained) {
    grad_clipped = std::move(grad_proj);
  } else if (groups) {
    grad_clipped = project_group_backward(grad_proj, clipped, *groups, state);
  } else {
    grad_clipped = project_l1_backward(grad_proj, clipped, state);
  }
  Matrix grad_eta = clip ? clip_signs_backward(grad_clipped, fr.coefficients, *signs)
                         : std::move(grad_clipped);

  out.gradients = backward(model, tape, grad_eta, grad_intercept);
  return out;
}

double compute_theta(const NetworkModel& model, const Dataset& train, double lambda,
                     const std::optional<GroupStructure>& groups,
                     const std::optional<SignConstraints>& signs) {
  if (std::isinf(lambda)) return 0.0;
  require(lambda >= 0.0, "compute_theta: negative lambda");
  // The lambda = 0 model must produce exactly-zero coefficients on any input,
  // not just the training rows, so the stored threshold saturates.
  if (lambda == 0.0) return std::numeric_limits<double>::max();

  ForwardResult fr = forward(model, train.Z);
  Matrix dense = (signs && !signs->empty()) ? clip_signs(fr.coefficients, *signs)
                                            : std::move(fr.coefficients);
  if (groups) return project_group(dense, *groups, lambda).state.theta;
  return project_l1(dense, lambda).state.theta;
}

double holdout_loss(const NetworkModel& model, const Dataset& data, double theta,
                    const std::optional<GroupStructure>& groups,
                    const std::optional<SignConstraints>& signs) {
  ForwardResult fr = forward(model, data.Z);
  Matrix dense = (signs && !signs->empty()) ? clip_signs(fr.coefficients, *signs)
                                            : std::move(fr.coefficients);
  Matrix coeffs = groups ? soft_threshold_grouped(dense, *groups, theta)
                         : soft_threshold(dense, theta);
  return mean_loss(data.task, linear_predictor(data.X, coeffs, fr.intercept), data.y);
}

FittedModel fit_single(const Dataset& train, const Dataset& val, double lambda,
                       const NetworkModel& init_weights, const OptimizerConfig& opt,
                       const std::optional<GroupStructure>& groups,
                       const std::optional<SignConstraints>& signs) {
  check_pair(train, val);
  opt.validate();
  require(lambda >= 0.0, "fit_single: negative lambda");
  if (groups) groups->validate(train.p());
  if (signs) signs->validate(train.p());
  require(!(groups && signs && !signs->empty()),
          "fit_single: sign constraints combined with groups are not supported");

  NetworkModel model = init_weights;
  AdamState adam = make_adam(model);
  Rng shuffle_rng(opt.shuffle_seed);

  const bool full_batch = opt.batch_size == 0 || opt.batch_size >= train.n();
  std::vector<std::size_t> order(train.n());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<Layer> best_weights = model.layers;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;

  // Epoch e evaluates the weights after e updates; the warm start itself is
  // the epoch-0 candidate, so a fit can never end worse than it began.
  for (std::size_t epoch = 0; epoch <= opt.max_epochs; ++epoch) {
    ObjectiveValue obj;  // full batch: gradients plus this epoch's theta
    if (full_batch) {
      obj = training_loss(model, train, lambda, groups, signs);
      if (!std::isfinite(obj.loss)) diverged("fit_single", epoch);
    }

    double vloss;
    try {
      double theta;
      if (lambda == 0.0 || std::isinf(lambda)) {
        theta = compute_theta(model, train, lambda, groups, signs);
      } else {
        theta = full_batch ? obj.theta : compute_theta(model, train, lambda, groups, signs);
      }
      vloss = holdout_loss(model, val, theta, groups, signs);
    } catch (const std::invalid_argument&) {
      // shapes were validated up front; the projection only rejects here when
      // the weights themselves have gone nonfinite
      diverged("fit_single", epoch);
    }
    if (!std::isfinite(vloss)) diverged("fit_single", epoch);
    if (vloss < best_loss) {
      best_loss = vloss;
      best_weights = model.layers;
      best_epoch = epoch;
    }
    if (epoch - best_epoch >= opt.patience || epoch == opt.max_epochs) break;

    if (full_batch) {
      adam_update(model, adam, obj.gradients, opt);
    } else {
      shuffle_rng.shuffle(order);
      for (std::size_t start = 0; start < train.n(); start += opt.batch_size) {
        const std::size_t stop = std::min(train.n(), start + opt.batch_size);
        std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
        ObjectiveValue mini = training_loss(model, select_rows(train, idx), lambda, groups, signs);
        if (!std::isfinite(mini.loss)) diverged("fit_single", epoch + 1);
        adam_update(model, adam, mini.gradients, opt);
      }
    }
    epochs_run = epoch + 1;
  }

  model.layers = std::move(best_weights);
  FittedModel out;
  out.task = train.task;
  out.theta_hat = compute_theta(model, train, lambda, groups, signs);
  out.network = std::move(model);
  out.lambda = lambda;
  out.groups = groups;
  out.signs = signs;
  out.baseline_response_mean = mean(train.y);
  out.validation_loss = best_loss;
  out.epochs_trained = epochs_run;
  return out;
}

PathResult fit_path(const Dataset& train, const Dataset& val, const NetworkConfig& net_config,
                    const PathConfig& path_config, const OptimizerConfig& opt,
                    const std::optional<GroupStructure>& groups,
                    const std::optional<SignConstraints>& signs) {
  check_pair(train, val);
  require(path_config.lambda_count >= 2, "fit_path: need at least two lambda values");
  require(net_config.p == train.p() && net_config.m == train.m(),
          "fit_path: network config does not match the data");

  const std::size_t T = path_config.lambda_count;
  PathResult path;
  path.lambdas.resize(T);
  path.models.reserve(T);

  FittedModel first = fit_single(train, val, kInf, init_network(net_config), opt, groups, signs);

  // lambda_1 is the mean training norm of the unregularized coefficients.
  ForwardResult fr = forward(first.network, train.Z);
  Matrix dense = (signs && !signs->empty()) ? clip_signs(fr.coefficients, *signs)
                                            : std::move(fr.coefficients);
  const double lambda_1 = groups ? mean_group_norm(dense, *groups) : mean_l1_norm(dense);
  require(lambda_1 > 0.0, "fit_path: degenerate path (unregularized fit has zero coefficients)");

  for (std::size_t t = 0; t < T; ++t)
    path.lambdas[t] = lambda_1 * static_cast<double>(T - 1 - t) / static_cast<double>(T - 1);

  first.lambda = path.lambdas[0];
  first.theta_hat = compute_theta(first.network, train, first.lambda, groups, signs);
  first.validation_loss = holdout_loss(first.network, val, first.theta_hat, groups, signs);
  path.models.push_back(std::move(first));

  for (std::size_t t = 1; t < T; ++t) {
    try {
      path.models.push_back(fit_single(train, val, path.lambdas[t],
                                       path.models.back().network, opt, groups, signs));
    } catch (const std::exception& e) {
      throw std::runtime_error("fit_path: fit " + std::to_string(t + 1) + " of " +
                               std::to_string(T) + " (lambda=" + format_double(path.lambdas[t]) +
                               ") failed: " + e.what());
    }
  }
  return path;
}

void relax(FittedModel& model, const Dataset& train, const Dataset& val,
           const OptimizerConfig& opt) {
  check_pair(train, val);
  opt.validate();

  model.gamma = 0.0;
  model.polished.reset();
  const BoolMatrix train_mask = support_pattern(model, train.Z);
  const BoolMatrix val_mask = support_pattern(model, val.Z);

  // Base (gamma = 0) validation coefficients and loss.
  const CoefficientMatrix base = inference_coefficients(model, val.Z);
  const double base_loss =
      mean_loss(val.task, linear_predictor(val.X, base.values, base.intercept), val.y);

  if (train_mask.count() == 0) {  // nothing to polish
    model.validation_loss = base_loss;
    return;
  }

  const bool clip = model.signs && !model.signs->empty();
  auto masked_coefficients = [&](const NetworkModel& net, const Dataset& data,
                                 const BoolMatrix& mask, ForwardTape* tape) {
    ForwardResult fr = tape ? forward(net, data.Z, *tape) : forward(net, data.Z);
    if (clip) fr.coefficients = clip_signs(fr.coefficients, *model.signs);
    for (std::size_t i = 0; i < fr.coefficients.rows(); ++i)
      for (std::size_t j = 0; j < fr.coefficients.cols(); ++j)
        if (!mask(i, j)) fr.coefficients(i, j) = 0.0;
    return fr;
  };

  NetworkModel polished = model.network;
  AdamState adam = make_adam(polished);

  auto polished_val_loss = [&](const NetworkModel& net) {
    ForwardResult fr = masked_coefficients(net, val, val_mask, nullptr);
    return mean_loss(val.task, linear_predictor(val.X, fr.coefficients, fr.intercept), val.y);
  };

  double best_loss = polished_val_loss(polished);
  std::vector<Layer> best_weights = polished.layers;
  std::size_t best_epoch = 0;

  for (std::size_t epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    ForwardTape tape;
    ForwardResult fr = masked_coefficients(polished, train, train_mask, &tape);
    const Vector f = linear_predictor(train.X, fr.coefficients, fr.intercept);
    const double loss = mean_loss(train.task, f, train.y);
    if (!std::isfinite(loss)) diverged("relax", epoch);

    // Masked entries contribute no gradient: a feature only trains on
    // observations where it is active.
    const Vector gf = loss_gradient(train.task, f, train.y);
    Matrix grad_eta(train.n(), train.p());
    for (std::size_t i = 0; i < train.n(); ++i) {
      const double* x = train.X.row(i);
      double* g = grad_eta.row(i);
      for (std::size_t j = 0; j < train.p(); ++j)
        g[j] = train_mask(i, j) ? gf[i] * x[j] : 0.0;
    }
    if (clip) {
      ForwardResult raw = forward(polished, train.Z);
      grad_eta = clip_signs_backward(grad_eta, raw.coefficients, *model.signs);
    }
    Vector grad_intercept;
    if (polished.config.include_intercept) grad_intercept = gf;
    adam_update(polished, adam, backward(polished, tape, grad_eta, grad_intercept), opt);

    const double vloss = polished_val_loss(polished);
    if (!std::isfinite(vloss)) diverged("relax", epoch);
    if (vloss < best_loss) {
      best_loss = vloss;
      best_weights = polished.layers;
      best_epoch = epoch;
    }
    if (epoch - best_epoch >= opt.patience) break;
  }
  polished.layers = std::move(best_weights);

  // Sweep the relaxation weight on the validation set; ties keep the smaller
  // gamma (more shrinkage).
  ForwardResult pol = masked_coefficients(polished, val, val_mask, nullptr);
  double best_gamma = 0.0;
  double best_combined = base_loss;
  for (int step = 1; step <= 10; ++step) {
    const double gamma = static_cast<double>(step) / 10.0;
    Matrix blend(base.values.rows(), base.values.cols());
    for (std::size_t i = 0; i < blend.rows(); ++i)
      for (std::size_t j = 0; j < blend.cols(); ++j)
        blend(i, j) = (1.0 - gamma) * base.values(i, j) + gamma * pol.coefficients(i, j);
    Vector intercept(base.intercept.size());
    for (std::size_t i = 0; i < intercept.size(); ++i)
      intercept[i] = (1.0 - gamma) * base.intercept[i] + gamma * pol.intercept[i];
    const double loss = mean_loss(val.task, linear_predictor(val.X, blend, intercept), val.y);
    if (loss < best_combined) {
      best_combined = loss;
      best_gamma = gamma;
    }
  }

  model.polished = std::move(polished);
  model.gamma = best_gamma;
  model.validation_loss = best_combined;
}

std::size_t select_index(const PathResult& path) {
  require(!path.models.empty(), "select_model: empty path");
  std::size_t best = 0;
  for (std::size_t t = 1; t < path.models.size(); ++t)
    if (path.models[t].validation_loss < path.models[best].validation_loss) best = t;
  return best;  // grid is decreasing, so ties keep the larger lambda
}

const FittedModel& select_model(const PathResult& path) { return path.models[select_index(path)]; }

}  // namespace cslm
