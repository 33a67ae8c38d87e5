#pragma once

#include <cstddef>
#include <vector>

#include "cslm/matrix.hpp"

namespace cslm {

// Outcome of a batch projection. theta is the soft-threshold level; k_max the
// number of magnitudes that define it (0 when the input was already feasible
// and the projection was the identity). active is |input| > theta; top_k marks
// the k_max largest magnitudes under the deterministic sort order. The two
// masks coincide except at exact |input| == theta ties.
struct ProjectionState {
  double theta = 0.0;
  std::size_t k_max = 0;
  double radius = 0.0;
  BoolMatrix active;
  BoolMatrix top_k;
};

struct ProjectionResult {
  Matrix coefficients;
  ProjectionState state;
};

// Nonoverlapping groups of column indices that partition {0, ..., p-1}.
struct GroupStructure {
  std::vector<std::vector<std::size_t>> groups;

  static GroupStructure singletons(std::size_t p);
  // throws unless the groups are disjoint and cover every column exactly once
  void validate(std::size_t p) const;
  std::size_t group_count() const { return groups.size(); }
};

// Columns whose coefficients are restricted in sign.
struct SignConstraints {
  std::vector<std::size_t> nonneg;
  std::vector<std::size_t> nonpos;

  void validate(std::size_t p) const;
  bool empty() const { return nonneg.empty() && nonpos.empty(); }
};

// Feasibility slack absorbed by the k_max scan's floating-point accumulation.
inline double feasibility_tolerance(double radius) {
  return 1e-9 * (radius > 1.0 ? radius : 1.0);
}

double mean_l1_norm(const Matrix& coefficients);
double mean_group_norm(const Matrix& coefficients, const GroupStructure& groups);

// Projects the rows of `dense` jointly onto the set with mean l1 norm at most
// `radius`. Returns the input unchanged (theta = 0) when already feasible.
ProjectionResult project_l1(const Matrix& dense, double radius);

// Reverse-mode gradient of project_l1 composed with `upstream`. Subgradients
// at |h| == theta and at h == 0 are taken as zero.
Matrix project_l1_backward(const Matrix& upstream, const Matrix& dense,
                           const ProjectionState& state);

// Grouped variant: projects the n x g matrix of group norms with project_l1
// and rescales each group by projected / original norm (zero-norm groups stay
// exactly zero). The returned state lives in norm space (n x g masks).
ProjectionResult project_group(const Matrix& dense, const GroupStructure& groups,
                               double radius);

Matrix project_group_backward(const Matrix& upstream, const Matrix& dense,
                              const GroupStructure& groups, const ProjectionState& state);

// Zeroes entries whose sign violates a constraint; composing clip_signs with
// project_l1 solves the sign-constrained projection.
Matrix clip_signs(const Matrix& dense, const SignConstraints& signs);

// Gradient of clip_signs: upstream is zeroed wherever the input was clipped.
Matrix clip_signs_backward(const Matrix& upstream, const Matrix& dense,
                           const SignConstraints& signs);

// Inference-time thresholding T(x) = sign(x) * max(|x| - theta_hat, 0). The
// output is not required to satisfy any radius constraint.
Matrix soft_threshold(const Matrix& dense, double theta_hat);

// Group analogue: thresholds group norms and rescales.
Matrix soft_threshold_grouped(const Matrix& dense, const GroupStructure& groups,
                              double theta_hat);

}  // namespace cslm
