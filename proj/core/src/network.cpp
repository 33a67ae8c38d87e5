#include "cslm/network.hpp"

#include <cmath>

#include "cslm/random.hpp"

namespace cslm {

namespace {

// out = in * W^T + b, with W stored out x in. An empty W (in == 0) broadcasts
// the bias, which is exactly the constant-coefficient mode. The accumulation
// runs over a transposed weight copy so the inner loop carries no dependency
// chain; the summation order is fixed, keeping results reproducible.
Matrix affine(const Matrix& in, const Layer& layer) {
  const std::size_t n = in.rows();
  const std::size_t out_dim = layer.bias.size();
  const std::size_t in_dim = layer.weights.cols();
  Matrix out(n, out_dim);

  std::vector<double> wt(in_dim * out_dim);
  for (std::size_t j = 0; j < out_dim; ++j)
    for (std::size_t k = 0; k < in_dim; ++k) wt[k * out_dim + j] = layer.weights(j, k);

  for (std::size_t r = 0; r < n; ++r) {
    const double* x = in.row(r);
    double* y = out.row(r);
    for (std::size_t j = 0; j < out_dim; ++j) y[j] = layer.bias[j];
    for (std::size_t k = 0; k < in_dim; ++k) {
      const double xk = x[k];
      if (xk == 0.0) continue;
      const double* w = wt.data() + k * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) y[j] += xk * w[j];
    }
  }
  return out;
}

Matrix rectify(const Matrix& pre) {
  Matrix act(pre.rows(), pre.cols());
  const double* p = pre.data();
  double* a = act.data();
  for (std::size_t k = 0; k < pre.size(); ++k) a[k] = p[k] > 0.0 ? p[k] : 0.0;
  return act;
}

ForwardResult split_outputs(Matrix full, const NetworkConfig& config) {
  ForwardResult res;
  if (!config.include_intercept) {
    res.coefficients = std::move(full);
    return res;
  }
  const std::size_t n = full.rows();
  res.coefficients = Matrix(n, config.p);
  res.intercept.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = full.row(i);
    double* dst = res.coefficients.row(i);
    for (std::size_t j = 0; j < config.p; ++j) dst[j] = src[j];
    res.intercept[i] = src[config.p];
  }
  return res;
}

Matrix forward_impl(const NetworkModel& model, const Matrix& Z, ForwardTape* tape) {
  require(Z.cols() == model.config.m, "forward: contextual matrix has wrong column count");
  require(Z.all_finite(), "forward: nonfinite contextual input");

  if (tape) {
    tape->input = Z;
    tape->hidden_pre.clear();
    tape->hidden_act.clear();
  }

  const std::size_t h = model.config.hidden_layers;
  Matrix current = Z;
  for (std::size_t l = 0; l < h; ++l) {
    Matrix pre = affine(current, model.layers[l]);
    Matrix act = rectify(pre);
    if (tape) {
      tape->hidden_pre.push_back(std::move(pre));
      tape->hidden_act.push_back(act);
    }
    current = std::move(act);
  }
  return affine(current, model.layers[h]);  // identity output layer
}

}  // namespace

std::size_t NetworkConfig::resolved_width() const {
  require(p >= 1 && m >= 1, "network config: p and m must be positive");
  if (hidden_layers == 0) return 0;
  if (width > 0) return width;

  const double budget = 32.0 * static_cast<double>(p) * static_cast<double>(m);
  const double h = static_cast<double>(hidden_layers);
  const double out = static_cast<double>(outputs());
  const double lin = static_cast<double>(m) + out + h;
  const double rhs = budget - out;
  double root;
  if (hidden_layers == 1) {
    root = rhs / lin;
  } else {
    const double a = h - 1.0;
    root = (-lin + std::sqrt(lin * lin + 4.0 * a * rhs)) / (2.0 * a);
  }
  const double rounded = std::floor(root + 0.5);
  require(rounded >= 1.0, "network config: parameter budget too small for a hidden layer");
  return static_cast<std::size_t>(rounded);
}

std::size_t NetworkModel::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers) count += layer.weights.size() + layer.bias.size();
  return count;
}

NetworkModel init_network(const NetworkConfig& config) {
  const std::size_t d = config.resolved_width();
  require(config.hidden_layers == 0 || d >= 1, "init_network: zero hidden width");

  std::vector<std::pair<std::size_t, std::size_t>> shapes;  // (out, in)
  if (config.hidden_layers == 0) {
    shapes.emplace_back(config.outputs(), 0);
  } else {
    shapes.emplace_back(d, config.m);
    for (std::size_t l = 1; l < config.hidden_layers; ++l) shapes.emplace_back(d, d);
    shapes.emplace_back(config.outputs(), d);
  }

  Rng rng(config.seed);
  NetworkModel model;
  model.config = config;
  model.layers.reserve(shapes.size());
  for (const auto& [out, in] : shapes) {
    Layer layer;
    layer.weights = Matrix(out, in);
    layer.bias.assign(out, 0.0);
    if (in > 0) {
      const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
      for (double& w : layer.weights.values()) w = rng.uniform(-bound, bound);
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

Gradients zero_gradients(const NetworkModel& model) {
  Gradients grads;
  grads.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    Layer g;
    g.weights = Matrix(layer.weights.rows(), layer.weights.cols());
    g.bias.assign(layer.bias.size(), 0.0);
    grads.push_back(std::move(g));
  }
  return grads;
}

ForwardResult forward(const NetworkModel& model, const Matrix& Z) {
  return split_outputs(forward_impl(model, Z, nullptr), model.config);
}

ForwardResult forward(const NetworkModel& model, const Matrix& Z, ForwardTape& tape) {
  return split_outputs(forward_impl(model, Z, &tape), model.config);
}

Gradients backward(const NetworkModel& model, const ForwardTape& tape,
                   const Matrix& grad_coefficients, const Vector& grad_intercept) {
  const NetworkConfig& config = model.config;
  const std::size_t n = tape.input.rows();
  require(grad_coefficients.rows() == n && grad_coefficients.cols() == config.p,
          "backward: coefficient gradient shape mismatch");
  require(!config.include_intercept || grad_intercept.size() == n,
          "backward: intercept gradient size mismatch");
  require(tape.hidden_pre.size() == config.hidden_layers,
          "backward: tape does not match the model architecture");

  // Assemble the gradient on the full output layer.
  Matrix grad_out(n, config.outputs());
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = grad_coefficients.row(i);
    double* dst = grad_out.row(i);
    for (std::size_t j = 0; j < config.p; ++j) dst[j] = src[j];
    if (config.include_intercept) dst[config.p] = grad_intercept[i];
  }

  Gradients grads = zero_gradients(model);
  Matrix delta = std::move(grad_out);

  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Layer& layer = model.layers[l];
    const Matrix* input = nullptr;
    if (l == 0) {
      input = &tape.input;
    } else {
      input = &tape.hidden_act[l - 1];
    }
    const std::size_t out_dim = layer.bias.size();
    const std::size_t in_dim = layer.weights.cols();

    Layer& g = grads[l];
    for (std::size_t r = 0; r < n; ++r) {
      const double* d = delta.row(r);
      const double* x = input->row(r);
      for (std::size_t j = 0; j < out_dim; ++j) {
        const double dj = d[j];
        if (dj == 0.0) continue;
        g.bias[j] += dj;
        double* gw = g.weights.row(j);
        for (std::size_t k = 0; k < in_dim; ++k) gw[k] += dj * x[k];
      }
    }

    if (l == 0) break;

    // Propagate to the previous activation and gate through the rectifier.
    const Matrix& pre = tape.hidden_pre[l - 1];
    Matrix prev(n, in_dim);
    for (std::size_t r = 0; r < n; ++r) {
      const double* d = delta.row(r);
      double* pv = prev.row(r);
      for (std::size_t j = 0; j < out_dim; ++j) {
        const double dj = d[j];
        if (dj == 0.0) continue;
        const double* w = layer.weights.row(j);
        for (std::size_t k = 0; k < in_dim; ++k) pv[k] += dj * w[k];
      }
      const double* pr = pre.row(r);
      for (std::size_t k = 0; k < in_dim; ++k)
        if (pr[k] <= 0.0) pv[k] = 0.0;
    }
    delta = std::move(prev);
  }
  return grads;
}

}  // namespace cslm
