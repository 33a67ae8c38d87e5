#include <doctest.h>

#include <cmath>
#include <limits>

#include "cslm/network.hpp"
#include "cslm/random.hpp"
#include "oracles.hpp"

using cslm::Matrix;
using cslm::NetworkConfig;
using cslm::NetworkModel;
using cslm::Rng;
using cslm::Vector;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t m, double scale = 1.0) {
  Matrix Z(n, m);
  for (double& v : Z.values()) v = rng.uniform(-scale, scale);
  return Z;
}

// flat view over every trainable parameter
std::vector<double*> parameter_pointers(NetworkModel& model) {
  std::vector<double*> ptrs;
  for (auto& layer : model.layers) {
    for (std::size_t k = 0; k < layer.weights.size(); ++k) ptrs.push_back(layer.weights.data() + k);
    for (auto& b : layer.bias) ptrs.push_back(&b);
  }
  return ptrs;
}

std::vector<double> gradient_values(const cslm::Gradients& grads) {
  std::vector<double> out;
  for (const auto& layer : grads) {
    out.insert(out.end(), layer.weights.values().begin(), layer.weights.values().end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

// independent matrix-by-matrix evaluation of the same architecture
Matrix naive_forward(const NetworkModel& model, const Matrix& Z) {
  std::vector<std::vector<double>> cur(Z.rows());
  for (std::size_t i = 0; i < Z.rows(); ++i)
    cur[i].assign(Z.row(i), Z.row(i) + Z.cols());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const bool hidden = l + 1 < model.layers.size();
    for (auto& row : cur) {
      std::vector<double> next(layer.bias.begin(), layer.bias.end());
      for (std::size_t o = 0; o < next.size(); ++o)
        for (std::size_t k = 0; k < layer.weights.cols(); ++k)
          next[o] += layer.weights(o, k) * row[k];
      if (hidden)
        for (auto& v : next) v = std::max(v, 0.0);
      row = std::move(next);
    }
  }
  Matrix out(Z.rows(), model.config.outputs());
  for (std::size_t i = 0; i < Z.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = cur[i][j];
  return out;
}

}  // namespace

TEST_CASE("init_network hits the parameter budget within 25 percent") {
  NetworkConfig config;
  config.p = 10;
  config.m = 2;
  config.hidden_layers = 3;
  config.seed = 1;
  const NetworkModel model = cslm::init_network(config);
  const double budget = 32.0 * 10.0 * 2.0;
  const double count = static_cast<double>(model.parameter_count());
  CHECK(std::abs(count - budget) / budget < 0.25);
  // hidden widths equal across layers
  CHECK(model.layers[0].weights.rows() == model.layers[1].weights.rows());
  CHECK(model.layers[1].weights.rows() == model.layers[2].weights.rows());
  for (const auto& layer : model.layers)
    for (double b : layer.bias) CHECK(b == 0.0);
}

TEST_CASE("constant mode is a bias-only affine map") {
  NetworkConfig config;
  config.p = 4;
  config.m = 3;
  config.hidden_layers = 0;
  const NetworkModel model = cslm::init_network(config);
  CHECK(model.layers.size() == 1);
  CHECK(model.layers[0].weights.cols() == 0);
  CHECK(model.layers[0].bias.size() == 5);  // p + intercept

  Rng rng(3);
  NetworkModel warm = model;
  for (auto& b : warm.layers[0].bias) b = rng.uniform(-1.0, 1.0);
  const Matrix Z = random_matrix(rng, 6, 3);
  const auto res = cslm::forward(warm, Z);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(res.coefficients(i, j) == warm.layers[0].bias[j]);
  for (std::size_t i = 0; i < 6; ++i) CHECK(res.intercept[i] == warm.layers[0].bias[4]);
}

TEST_CASE("init_network is deterministic per seed") {
  NetworkConfig config;
  config.p = 5;
  config.m = 2;
  config.seed = 42;
  const NetworkModel a = cslm::init_network(config);
  const NetworkModel b = cslm::init_network(config);
  REQUIRE(a.layers.size() == b.layers.size());
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].weights == b.layers[l].weights);
    CHECK(a.layers[l].bias == b.layers[l].bias);
  }
  config.seed = 43;
  const NetworkModel c = cslm::init_network(config);
  CHECK(a.layers[0].weights != c.layers[0].weights);
}

TEST_CASE("init_network rejects infeasible sizing") {
  NetworkConfig config;
  config.p = 1;
  config.m = 1;
  config.hidden_layers = 50;  // budget of 32 cannot feed 50 layers
  CHECK_THROWS_AS(cslm::init_network(config), std::invalid_argument);
}

TEST_CASE("forward matches a naive reimplementation") {
  NetworkConfig config;
  config.p = 3;
  config.m = 2;
  config.hidden_layers = 2;
  config.width = 4;
  config.seed = 9;
  const NetworkModel model = cslm::init_network(config);
  Rng rng(10);
  NetworkModel scaled = model;
  for (auto& layer : scaled.layers) {
    for (double& w : layer.weights.values()) w *= 2.0;
    for (double& b : layer.bias) b = rng.uniform(-0.5, 0.5);
  }
  const Matrix Z = random_matrix(rng, 7, 2);
  const auto res = cslm::forward(scaled, Z);
  const Matrix ref = naive_forward(scaled, Z);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(res.coefficients(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-12));
    CHECK(res.intercept[i] == doctest::Approx(ref(i, 3)).epsilon(1e-12));
  }
}

TEST_CASE("forward with all-zero weights returns zeros") {
  NetworkConfig config;
  config.p = 2;
  config.m = 2;
  config.width = 3;
  const NetworkModel zeroed = [&] {
    NetworkModel model = cslm::init_network(config);
    for (auto& layer : model.layers)
      for (double& w : layer.weights.values()) w = 0.0;
    return model;
  }();
  Rng rng(5);
  const auto res = cslm::forward(zeroed, random_matrix(rng, 4, 2));
  for (double v : res.coefficients.values()) CHECK(v == 0.0);
}

TEST_CASE("forward rejects bad contextual input") {
  NetworkConfig config;
  config.p = 2;
  config.m = 2;
  config.width = 3;
  const NetworkModel model = cslm::init_network(config);
  CHECK_THROWS_AS(cslm::forward(model, Matrix(4, 3, 0.0)), std::invalid_argument);
  Matrix bad(4, 2, 0.0);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(cslm::forward(model, bad), std::invalid_argument);
}

TEST_CASE("backward zero upstream gives zero gradients, and is linear") {
  NetworkConfig config;
  config.p = 2;
  config.m = 2;
  config.hidden_layers = 2;
  config.width = 2;
  config.seed = 21;
  const NetworkModel model = cslm::init_network(config);
  Rng rng(22);
  const Matrix Z = random_matrix(rng, 5, 2);
  cslm::ForwardTape tape;
  cslm::forward(model, Z, tape);

  const auto zero = cslm::backward(model, tape, Matrix(5, 2, 0.0), Vector(5, 0.0));
  for (double v : gradient_values(zero)) CHECK(v == 0.0);

  const Matrix g1 = random_matrix(rng, 5, 2);
  const Matrix g2 = random_matrix(rng, 5, 2);
  Matrix sum(5, 2);
  for (std::size_t k = 0; k < sum.size(); ++k) sum.data()[k] = g1.data()[k] + g2.data()[k];
  const Vector gi1(5, 0.25), gi2(5, -0.5), gis(5, -0.25);
  const auto a = gradient_values(cslm::backward(model, tape, g1, gi1));
  const auto b = gradient_values(cslm::backward(model, tape, g2, gi2));
  const auto s = gradient_values(cslm::backward(model, tape, sum, gis));
  for (std::size_t k = 0; k < s.size(); ++k)
    CHECK(s[k] == doctest::Approx(a[k] + b[k]).epsilon(1e-12));
}

TEST_CASE("backward matches central finite differences on a 2-2-2 network") {
  NetworkConfig config;
  config.p = 2;
  config.m = 2;
  config.hidden_layers = 2;
  config.width = 2;
  config.seed = 33;
  Rng rng(34);
  const double h = 1e-6;

  for (int trial = 0; trial < 20; ++trial) {
    NetworkModel model = cslm::init_network(config);
    for (auto& layer : model.layers)
      for (double& b : layer.bias) b = rng.uniform(-0.3, 0.3);
    const Matrix Z = random_matrix(rng, 4, 2);
    const Matrix upstream = random_matrix(rng, 4, 2);
    const Vector up_int = {0.3, -0.2, 0.1, 0.4};

    // stay clear of rectifier kinks so differences are two-sided smooth
    cslm::ForwardTape tape;
    cslm::forward(model, Z, tape);
    bool ok = true;
    for (const auto& pre : tape.hidden_pre)
      for (double v : pre.values())
        if (std::abs(v) < 1e-4) ok = false;
    if (!ok) continue;

    auto objective = [&](NetworkModel& m) {
      const auto res = cslm::forward(m, Z);
      double s = 0.0;
      for (std::size_t k = 0; k < res.coefficients.size(); ++k)
        s += upstream.data()[k] * res.coefficients.data()[k];
      for (std::size_t i = 0; i < res.intercept.size(); ++i) s += up_int[i] * res.intercept[i];
      return s;
    };

    const auto grads = cslm::backward(model, tape, upstream, up_int);
    const auto analytic = gradient_values(grads);
    const auto ptrs = parameter_pointers(model);
    Vector fd(ptrs.size());
    for (std::size_t k = 0; k < ptrs.size(); ++k) {
      fd[k] = oracles::central_difference(
          [&](double x) {
            const double saved = *ptrs[k];
            *ptrs[k] = x;
            const double v = objective(model);
            *ptrs[k] = saved;
            return v;
          },
          *ptrs[k], h);
    }
    CHECK(oracles::relative_l2_error(analytic, fd) < 1e-5);
  }
}

TEST_CASE("forward is deterministic for identical config, seed, and data") {
  NetworkConfig config;
  config.p = 3;
  config.m = 2;
  config.seed = 77;
  Rng rng(78);
  const Matrix Z = random_matrix(rng, 8, 2);
  const auto a = cslm::forward(cslm::init_network(config), Z);
  const auto b = cslm::forward(cslm::init_network(config), Z);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.intercept == b.intercept);
}

TEST_CASE("constant mode output is independent of Z") {
  NetworkConfig config;
  config.p = 3;
  config.m = 2;
  config.hidden_layers = 0;
  NetworkModel model = cslm::init_network(config);
  Rng rng(80);
  for (auto& b : model.layers[0].bias) b = rng.uniform(-1.0, 1.0);
  const auto a = cslm::forward(model, random_matrix(rng, 5, 2));
  const auto b = cslm::forward(model, random_matrix(rng, 5, 2));
  CHECK(a.coefficients == b.coefficients);
  double worst = 0.0;
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      worst = std::max(worst, std::abs(a.coefficients(i, j) - a.coefficients(0, j)));
  CHECK(worst == 0.0);
}
