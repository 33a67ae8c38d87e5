#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cslm/matrix.hpp"
#include "cslm/types.hpp"

namespace cslm {

struct Dataset {
  Vector y;
  Matrix X;  // n x p explanatory
  Matrix Z;  // n x m contextual
  Task task = Task::regression;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::string y_name = "y";

  std::size_t n() const { return y.size(); }
  std::size_t p() const { return X.cols(); }
  std::size_t m() const { return Z.cols(); }

  // throws on shape inconsistencies, nonfinite entries, or classification
  // responses outside {0, 1}
  void validate() const;
};

// Column means and standard deviations (n-1 denominator) recorded at fit time
// so coefficients can be expressed on the original scale.
struct Standardizer {
  Vector x_means, x_sds;
  Vector z_means, z_sds;
};

// Centers and scales every X and Z column to mean 0, sd 1. The response is
// untouched. Constant columns are rejected with the offending column's name.
std::pair<Dataset, Standardizer> standardize(const Dataset& data);

// Applies a previously fitted standardizer (validation/test data).
Dataset apply_standardizer(const Dataset& data, const Standardizer& s);

// Maps standardized-scale coefficients back to the original scale:
// beta_j / sd_j, with the intercept absorbing the column means. Zero entries
// stay exactly zero.
CoefficientMatrix destandardize_coefficients(const CoefficientMatrix& coeffs,
                                             const Standardizer& s);

struct SimulationSpec {
  std::size_t p = 10;
  std::size_t m = 2;
  std::size_t n = 1000;
  Task task = Task::regression;
  std::uint64_t seed = 0;
  double signal_variance = 5.0;
  double correlation_base = 0.5;
  double sparsity_min = 0.05;
  double sparsity_max = 0.15;
  Vector sparsity_targets;           // empty = drawn per feature from the range
  double train_fraction = 0.6;       // kappa is calibrated on the leading rows
  std::size_t calibration_samples = 1000000;
};

struct SimulationResult {
  Dataset data;
  BoolMatrix true_support;           // n x p nonzero pattern of the generator
  std::vector<Vector> centers;       // p centers in contextual space
  Vector radii;
  Vector sparsity_targets;
  Vector realized_sparsity;          // per-feature fraction of supported rows
  double kappa = 0.0;
};

// Appendix-style synthetic generator: X rows AR-correlated Gaussian, Z uniform
// on [-1,1]^m, coefficients decaying linearly inside per-feature hyperspheres,
// signal variance calibrated to `signal_variance` on the training portion.
SimulationResult simulate(const SimulationSpec& spec);

// Copy of the given rows, in order.
Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& indices);

struct SplitResult {
  Dataset train, val, test;
  std::vector<std::size_t> train_indices, val_indices, test_indices;
};

// Disjoint uniform-random partition, deterministic per seed. Sizes are the
// rounded fractions; every part must be nonempty.
SplitResult split(const Dataset& data, double train_fraction, double val_fraction,
                  double test_fraction, std::uint64_t seed);

struct TableSchema {
  std::string response;
  std::vector<std::string> contextual;
  std::vector<std::string> explanatory;  // empty = every remaining column
  Task task = Task::regression;
  char delimiter = ',';
};

// Reads a delimited text file with a header row. Parse errors cite the
// 1-based line number; schema errors name the missing column.
Dataset load_table(const std::string& path, const TableSchema& schema);

void write_dataset(const std::string& path, const Dataset& data, char delimiter = ',');
void write_support(const std::string& path, const BoolMatrix& support,
                   const std::vector<std::string>& column_names, char delimiter = ',');
BoolMatrix load_support(const std::string& path, char delimiter = ',');

// Shortest round-trip decimal representation, used for all file output.
std::string format_double(double v);

}  // namespace cslm
