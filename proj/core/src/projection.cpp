#include "cslm/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cslm {

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double threshold_one(double x, double theta) {
  const double m = std::abs(x) - theta;
  return m > 0.0 ? sign_of(x) * m : 0.0;
}

void check_dense(const Matrix& dense) {
  require(dense.rows() >= 1 && dense.cols() >= 1, "projection: empty coefficient matrix");
  require(dense.all_finite(), "projection: nonfinite entry in coefficient matrix");
}

Matrix group_norms(const Matrix& dense, const GroupStructure& groups) {
  Matrix norms(dense.rows(), groups.group_count());
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    const double* h = dense.row(i);
    for (std::size_t k = 0; k < groups.group_count(); ++k) {
      double s = 0.0;
      for (std::size_t j : groups.groups[k]) s += h[j] * h[j];
      norms(i, k) = std::sqrt(s);
    }
  }
  return norms;
}

}  // namespace

GroupStructure GroupStructure::singletons(std::size_t p) {
  GroupStructure gs;
  gs.groups.resize(p);
  for (std::size_t j = 0; j < p; ++j) gs.groups[j] = {j};
  return gs;
}

void GroupStructure::validate(std::size_t p) const {
  require(!groups.empty(), "groups: empty group structure");
  std::vector<std::uint8_t> seen(p, 0);
  std::size_t covered = 0;
  for (const auto& g : groups) {
    require(!g.empty(), "groups: empty group");
    for (std::size_t j : g) {
      require(j < p, "groups: column index out of range");
      require(!seen[j], "groups: overlapping groups");
      seen[j] = 1;
      ++covered;
    }
  }
  require(covered == p, "groups: groups must partition the full column set");
}

void SignConstraints::validate(std::size_t p) const {
  std::vector<std::uint8_t> pos(p, 0);
  for (std::size_t j : nonneg) {
    require(j < p, "signs: nonneg index out of range");
    pos[j] = 1;
  }
  for (std::size_t j : nonpos) {
    require(j < p, "signs: nonpos index out of range");
    require(!pos[j], "signs: index constrained both nonnegative and nonpositive");
  }
}

double mean_l1_norm(const Matrix& coefficients) {
  double total = 0.0;
  for (double v : coefficients.values()) total += std::abs(v);
  return total / static_cast<double>(coefficients.rows());
}

double mean_group_norm(const Matrix& coefficients, const GroupStructure& groups) {
  const Matrix norms = group_norms(coefficients, groups);
  double total = 0.0;
  for (double v : norms.values()) total += v;
  return total / static_cast<double>(coefficients.rows());
}

ProjectionResult project_l1(const Matrix& dense, double radius) {
  check_dense(dense);
  require(radius >= 0.0, "project_l1: negative radius");

  const std::size_t n = dense.rows();
  const std::size_t p = dense.cols();
  const std::size_t total = n * p;
  const double budget = radius * static_cast<double>(n);

  double total_l1 = 0.0;
  for (double v : dense.values()) total_l1 += std::abs(v);

  ProjectionResult out;
  out.state.radius = radius;
  out.state.active = BoolMatrix(n, p);
  out.state.top_k = BoolMatrix(n, p);

  // Feasible inputs pass through untouched; the tolerance makes the
  // projection exactly idempotent despite rounding in the k_max scan.
  if (total_l1 <= budget + static_cast<double>(n) * feasibility_tolerance(radius)) {
    out.coefficients = dense;
    out.state.theta = 0.0;
    out.state.k_max = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) out.state.active.set(i, j, dense(i, j) != 0.0);
    return out;
  }

  const double* h = dense.data();

  if (radius == 0.0) {
    // everything is thresholded away; theta is pinned by the largest
    // magnitude, first occurrence on ties
    double theta = 0.0;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < total; ++k) {
      const double m = std::abs(h[k]);
      if (m > theta) {
        theta = m;
        arg = k;
      }
    }
    out.state.theta = theta;
    out.state.k_max = 1;
    out.state.top_k.set(arg / p, arg % p, true);
    out.coefficients = Matrix(n, p);
    return out;
  }

  // Fast path: magnitudes alone determine theta. The k_max scan guarantees
  // mu_{k_max} > theta >= mu_{k_max+1}, so the thresholded set identifies the
  // k_max largest entries exactly unless rounding puts theta on a tie.
  std::vector<double> mu(total);
  for (std::size_t k = 0; k < total; ++k) mu[k] = std::abs(h[k]);
  std::sort(mu.begin(), mu.end(), std::greater<>());

  std::size_t k_max = 0;
  double prefix = 0.0;
  double prefix_at_kmax = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    prefix += mu[k];
    // mu_k > (prefix_k - n*lambda) / k, rearranged to avoid the division
    if (mu[k] * static_cast<double>(k + 1) > prefix - budget) {
      k_max = k + 1;
      prefix_at_kmax = prefix;
    }
  }
  const double theta = (prefix_at_kmax - budget) / static_cast<double>(k_max);

  out.state.theta = theta;
  out.state.k_max = k_max;
  out.coefficients = Matrix(n, p);
  double* b = out.coefficients.data();
  std::size_t active_count = 0;
  for (std::size_t k = 0; k < total; ++k) {
    b[k] = threshold_one(h[k], theta);
    if (std::abs(h[k]) > theta) {
      out.state.active.set(k / p, k % p, true);
      ++active_count;
    }
  }
  if (active_count == k_max) {
    out.state.top_k = out.state.active;
    return out;
  }

  // Tie at the boundary: fall back to the stable order on
  // (magnitude desc, flat index asc) to pin down the k_max set.
  std::vector<std::pair<double, std::size_t>> order(total);
  for (std::size_t k = 0; k < total; ++k) order[k] = {std::abs(h[k]), k};
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t k = 0; k < k_max; ++k) {
    const std::size_t flat = order[k].second;
    out.state.top_k.set(flat / p, flat % p, true);
  }
  return out;
}

Matrix project_l1_backward(const Matrix& upstream, const Matrix& dense,
                           const ProjectionState& state) {
  require(upstream.rows() == dense.rows() && upstream.cols() == dense.cols(),
          "project_l1_backward: upstream/input shape mismatch");
  require(state.active.rows() == dense.rows() && state.active.cols() == dense.cols(),
          "project_l1_backward: state does not match input shape");

  if (state.theta == 0.0) return upstream;  // projection was the identity

  const std::size_t n = dense.rows();
  const std::size_t p = dense.cols();

  // d(theta)/dh = sign(h)/k_max over the k_max largest magnitudes, and each
  // active output moves by -sign(h_out) * d(theta).
  double coupled = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (state.active(i, j)) coupled += upstream(i, j) * sign_of(dense(i, j));
  coupled /= static_cast<double>(state.k_max);

  Matrix grad(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      double g = state.active(i, j) ? upstream(i, j) : 0.0;
      if (state.top_k(i, j)) g -= coupled * sign_of(dense(i, j));
      grad(i, j) = g;
    }
  }
  return grad;
}

ProjectionResult project_group(const Matrix& dense, const GroupStructure& groups,
                               double radius) {
  check_dense(dense);
  groups.validate(dense.cols());

  const Matrix norms = group_norms(dense, groups);
  ProjectionResult norm_proj = project_l1(norms, radius);

  ProjectionResult out;
  out.state = std::move(norm_proj.state);
  out.coefficients = Matrix(dense.rows(), dense.cols());
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    for (std::size_t k = 0; k < groups.group_count(); ++k) {
      const double xi = norms(i, k);
      if (xi == 0.0) continue;  // zero-norm group stays exactly zero
      const double scale = norm_proj.coefficients(i, k) / xi;
      for (std::size_t j : groups.groups[k]) out.coefficients(i, j) = dense(i, j) * scale;
    }
  }
  return out;
}

Matrix project_group_backward(const Matrix& upstream, const Matrix& dense,
                              const GroupStructure& groups, const ProjectionState& state) {
  require(upstream.rows() == dense.rows() && upstream.cols() == dense.cols(),
          "project_group_backward: upstream/input shape mismatch");
  groups.validate(dense.cols());
  require(state.active.rows() == dense.rows() && state.active.cols() == groups.group_count(),
          "project_group_backward: state does not match group layout");

  const std::size_t n = dense.rows();
  const std::size_t g = groups.group_count();
  const Matrix norms = group_norms(dense, groups);

  // Recover the projected norms and the upstream sensitivity in norm space.
  Matrix scale(n, g);       // projected norm / norm, 0 for zero-norm groups
  Matrix norm_grad(n, g);   // dL/d(projected norm)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < g; ++k) {
      const double xi = norms(i, k);
      if (xi == 0.0) continue;
      double dot = 0.0;
      for (std::size_t j : groups.groups[k]) dot += upstream(i, j) * dense(i, j);
      norm_grad(i, k) = dot / xi;
      scale(i, k) = threshold_one(xi, state.theta) / xi;
    }
  }

  const Matrix through_norms = project_l1_backward(norm_grad, norms, state);

  Matrix grad(n, dense.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < g; ++k) {
      const double xi = norms(i, k);
      if (xi == 0.0) continue;
      const double s = scale(i, k);
      const double shared = (through_norms(i, k) - norm_grad(i, k) * s) / xi;
      for (std::size_t j : groups.groups[k])
        grad(i, j) = upstream(i, j) * s + shared * dense(i, j);
    }
  }
  return grad;
}

Matrix clip_signs(const Matrix& dense, const SignConstraints& signs) {
  check_dense(dense);
  signs.validate(dense.cols());
  Matrix out = dense;
  for (std::size_t j : signs.nonneg)
    for (std::size_t i = 0; i < out.rows(); ++i)
      if (out(i, j) < 0.0) out(i, j) = 0.0;
  for (std::size_t j : signs.nonpos)
    for (std::size_t i = 0; i < out.rows(); ++i)
      if (out(i, j) > 0.0) out(i, j) = 0.0;
  return out;
}

Matrix clip_signs_backward(const Matrix& upstream, const Matrix& dense,
                           const SignConstraints& signs) {
  require(upstream.rows() == dense.rows() && upstream.cols() == dense.cols(),
          "clip_signs_backward: shape mismatch");
  Matrix grad = upstream;
  for (std::size_t j : signs.nonneg)
    for (std::size_t i = 0; i < grad.rows(); ++i)
      if (dense(i, j) < 0.0) grad(i, j) = 0.0;
  for (std::size_t j : signs.nonpos)
    for (std::size_t i = 0; i < grad.rows(); ++i)
      if (dense(i, j) > 0.0) grad(i, j) = 0.0;
  return grad;
}

Matrix soft_threshold(const Matrix& dense, double theta_hat) {
  check_dense(dense);
  require(theta_hat >= 0.0, "soft_threshold: negative threshold");
  Matrix out(dense.rows(), dense.cols());
  const double* h = dense.data();
  double* b = out.data();
  for (std::size_t k = 0; k < dense.size(); ++k) b[k] = threshold_one(h[k], theta_hat);
  return out;
}

Matrix soft_threshold_grouped(const Matrix& dense, const GroupStructure& groups,
                              double theta_hat) {
  check_dense(dense);
  require(theta_hat >= 0.0, "soft_threshold_grouped: negative threshold");
  groups.validate(dense.cols());
  const Matrix norms = group_norms(dense, groups);
  Matrix out(dense.rows(), dense.cols());
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    for (std::size_t k = 0; k < groups.group_count(); ++k) {
      const double xi = norms(i, k);
      if (xi == 0.0) continue;
      const double scale = threshold_one(xi, theta_hat) / xi;
      if (scale == 0.0) continue;
      for (std::size_t j : groups.groups[k]) out(i, j) = dense(i, j) * scale;
    }
  }
  return out;
}

}  // namespace cslm
