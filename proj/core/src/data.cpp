#include "cslm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "cslm/random.hpp"

namespace cslm {

namespace {

std::vector<std::string> default_names(const std::string& prefix, std::size_t count) {
  std::vector<std::string> names(count);
  for (std::size_t j = 0; j < count; ++j) names[j] = prefix + std::to_string(j + 1);
  return names;
}

void standardize_columns(Matrix& M, const std::vector<std::string>& names, Vector& means,
                         Vector& sds) {
  const std::size_t n = M.rows();
  const std::size_t c = M.cols();
  means.assign(c, 0.0);
  sds.assign(c, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += M(i, j);
    means[j] = s / static_cast<double>(n);
  }
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = M(i, j) - means[j];
      s += d * d;
    }
    const double var = n > 1 ? s / static_cast<double>(n - 1) : 0.0;
    if (var <= 0.0) {
      const std::string name = j < names.size() ? names[j] : std::to_string(j + 1);
      throw std::invalid_argument("standardize: constant column '" + name + "'");
    }
    sds[j] = std::sqrt(var);
  }
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t i = 0; i < n; ++i) M(i, j) = (M(i, j) - means[j]) / sds[j];
}

void apply_columns(Matrix& M, const Vector& means, const Vector& sds) {
  require(M.cols() == means.size() && M.cols() == sds.size(),
          "apply_standardizer: column count mismatch");
  for (std::size_t j = 0; j < M.cols(); ++j)
    for (std::size_t i = 0; i < M.rows(); ++i) M(i, j) = (M(i, j) - means[j]) / sds[j];
}

double parse_cell(const std::string& cell, std::size_t line_no) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw std::invalid_argument("load_table: non-numeric cell '" + cell + "' at line " +
                                std::to_string(line_no));
  if (!std::isfinite(value))
    throw std::invalid_argument("load_table: nonfinite value at line " + std::to_string(line_no));
  return value;
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delimiter)) cells.push_back(cell);
  if (!line.empty() && line.back() == delimiter) cells.emplace_back();
  return cells;
}

}  // namespace

void Dataset::validate() const {
  require(n() >= 1, "dataset: empty");
  require(X.rows() == n() && Z.rows() == n(), "dataset: row count mismatch between y, X, Z");
  require(p() >= 1, "dataset: no explanatory columns");
  require(X.all_finite() && Z.all_finite(), "dataset: nonfinite feature entry");
  for (double v : y) require(std::isfinite(v), "dataset: nonfinite response");
  if (task == Task::classification)
    for (double v : y)
      require(v == 0.0 || v == 1.0, "dataset: classification response outside {0,1}");
}

std::pair<Dataset, Standardizer> standardize(const Dataset& data) {
  data.validate();
  Dataset out = data;
  Standardizer s;
  standardize_columns(out.X, data.x_names, s.x_means, s.x_sds);
  if (out.m() > 0) standardize_columns(out.Z, data.z_names, s.z_means, s.z_sds);
  return {std::move(out), std::move(s)};
}

Dataset apply_standardizer(const Dataset& data, const Standardizer& s) {
  data.validate();
  Dataset out = data;
  apply_columns(out.X, s.x_means, s.x_sds);
  if (out.m() > 0) apply_columns(out.Z, s.z_means, s.z_sds);
  return out;
}

CoefficientMatrix destandardize_coefficients(const CoefficientMatrix& coeffs,
                                             const Standardizer& s) {
  require(coeffs.values.cols() == s.x_sds.size(),
          "destandardize: coefficient/standardizer column mismatch");
  CoefficientMatrix out;
  out.values = Matrix(coeffs.values.rows(), coeffs.values.cols());
  const bool has_intercept = !coeffs.intercept.empty();
  if (has_intercept) out.intercept.resize(coeffs.intercept.size());
  for (std::size_t i = 0; i < coeffs.values.rows(); ++i) {
    double shift = 0.0;
    for (std::size_t j = 0; j < coeffs.values.cols(); ++j) {
      const double b = coeffs.values(i, j);
      out.values(i, j) = b == 0.0 ? 0.0 : b / s.x_sds[j];
      shift += b * s.x_means[j] / s.x_sds[j];
    }
    if (has_intercept) out.intercept[i] = coeffs.intercept[i] - shift;
  }
  return out;
}

SimulationResult simulate(const SimulationSpec& spec) {
  require(spec.p >= 1 && spec.m >= 1 && spec.n >= 2, "simulate: p, m >= 1 and n >= 2 required");
  require(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0,
          "simulate: train_fraction must lie in (0, 1]");
  require(spec.sparsity_min > 0.0 && spec.sparsity_max <= 1.0 &&
              spec.sparsity_min <= spec.sparsity_max,
          "simulate: invalid sparsity range");
  require(spec.calibration_samples >= 1000, "simulate: too few calibration samples");

  Rng rng(spec.seed);
  const std::size_t p = spec.p;
  const std::size_t m = spec.m;
  const std::size_t n = spec.n;

  // Per-feature sparsity targets, drawn unless pinned by the caller.
  Vector targets = spec.sparsity_targets;
  if (targets.empty()) {
    targets.resize(p);
    for (double& t : targets) t = rng.uniform(spec.sparsity_min, spec.sparsity_max);
  } else {
    require(targets.size() == p, "simulate: sparsity_targets size mismatch");
    for (double t : targets)
      require(t >= spec.sparsity_min && t <= spec.sparsity_max,
              "simulate: sparsity target outside the calibrated range [" +
                  format_double(spec.sparsity_min) + ", " + format_double(spec.sparsity_max) +
                  "]");
  }

  // Hypersphere centers, uniform over the contextual cube.
  std::vector<Vector> centers(p, Vector(m));
  for (auto& c : centers)
    for (double& v : c) v = rng.uniform(-1.0, 1.0);

  // Radius calibration: each radius is the target quantile of the distance
  // from a random contextual point to the center, estimated once from a
  // shared Monte Carlo pool.
  const std::size_t cal = spec.calibration_samples;
  Matrix pool(cal, m);
  for (double& v : pool.values()) v = rng.uniform(-1.0, 1.0);
  Vector radii(p);
  Vector dist(cal);
  const double diameter = 2.0 * std::sqrt(static_cast<double>(m));
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t s = 0; s < cal; ++s) {
      double d2 = 0.0;
      const double* z = pool.row(s);
      for (std::size_t k = 0; k < m; ++k) {
        const double d = z[k] - centers[j][k];
        d2 += d * d;
      }
      dist[s] = std::sqrt(d2);
    }
    std::size_t k = static_cast<std::size_t>(
        std::floor(targets[j] * static_cast<double>(cal) + 0.5));
    if (k == 0) k = 1;
    require(k <= cal, "simulate: sparsity target unreachable");
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    radii[j] = dist[k - 1];
    require(radii[j] <= diameter, "simulate: calibrated radius exceeds the contextual diameter");
  }

  // Explanatory rows: AR-structured Gaussian via the triangular recursion
  // x_j = rho * x_{j-1} + sqrt(1 - rho^2) * e_j.
  const double rho = spec.correlation_base;
  const double innovation = std::sqrt(1.0 - rho * rho);
  Matrix X(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    double* x = X.row(i);
    x[0] = rng.normal();
    for (std::size_t j = 1; j < p; ++j) x[j] = rho * x[j - 1] + innovation * rng.normal();
  }

  Matrix Z(n, m);
  for (double& v : Z.values()) v = rng.uniform(-1.0, 1.0);

  // Coefficient surface and raw signal.
  BoolMatrix support(n, p);
  Vector raw_signal(n, 0.0);
  Vector realized(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = Z.row(i);
    const double* x = X.row(i);
    double mu = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double d = z[k] - centers[j][k];
        d2 += d * d;
      }
      const double d = std::sqrt(d2);
      if (d <= radii[j]) {
        const double beta = 1.0 - d / (2.0 * radii[j]);
        mu += x[j] * beta;
        support.set(i, j, true);
        realized[j] += 1.0;
      }
    }
    raw_signal[i] = mu;
  }
  for (double& r : realized) r /= static_cast<double>(n);

  // Signal strength calibrated on the leading training fraction.
  const std::size_t n_train =
      std::max<std::size_t>(2, static_cast<std::size_t>(
                                   std::ceil(spec.train_fraction * static_cast<double>(n))));
  Vector train_signal(raw_signal.begin(),
                      raw_signal.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)));
  const double var = sample_variance(train_signal);
  require(var > 0.0, "simulate: degenerate signal (no supported coefficients in training rows)");
  const double kappa = std::sqrt(spec.signal_variance / var);

  Dataset data;
  data.task = spec.task;
  data.X = std::move(X);
  data.Z = std::move(Z);
  data.x_names = default_names("x", p);
  data.z_names = default_names("z", m);
  data.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = kappa * raw_signal[i];
    if (spec.task == Task::regression) {
      data.y[i] = mu + rng.normal();
    } else {
      const double prob = 1.0 / (1.0 + std::exp(-mu));
      data.y[i] = rng.uniform01() < prob ? 1.0 : 0.0;
    }
  }

  SimulationResult result;
  result.data = std::move(data);
  result.true_support = std::move(support);
  result.centers = std::move(centers);
  result.radii = std::move(radii);
  result.sparsity_targets = std::move(targets);
  result.realized_sparsity = std::move(realized);
  result.kappa = kappa;
  return result;
}

Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.task = data.task;
  out.x_names = data.x_names;
  out.z_names = data.z_names;
  out.y_name = data.y_name;
  out.y.resize(indices.size());
  out.X = Matrix(indices.size(), data.p());
  out.Z = Matrix(indices.size(), data.m());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    require(i < data.n(), "select_rows: index out of range");
    out.y[r] = data.y[i];
    for (std::size_t j = 0; j < data.p(); ++j) out.X(r, j) = data.X(i, j);
    for (std::size_t j = 0; j < data.m(); ++j) out.Z(r, j) = data.Z(i, j);
  }
  return out;
}

SplitResult split(const Dataset& data, double train_fraction, double val_fraction,
                  double test_fraction, std::uint64_t seed) {
  data.validate();
  require(train_fraction > 0.0 && val_fraction > 0.0 && test_fraction > 0.0,
          "split: fractions must be positive");
  require(std::abs(train_fraction + val_fraction + test_fraction - 1.0) < 1e-9,
          "split: fractions must sum to 1");

  const std::size_t n = data.n();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::size_t n_train = static_cast<std::size_t>(std::floor(train_fraction * n + 0.5));
  std::size_t n_val = static_cast<std::size_t>(std::floor(val_fraction * n + 0.5));
  if (n_train + n_val > n) n_val = n - n_train;
  const std::size_t n_test = n - n_train - n_val;
  require(n_train >= 1 && n_val >= 1 && n_test >= 1, "split: a part would be empty");

  SplitResult out;
  out.train_indices.assign(order.begin(), order.begin() + n_train);
  out.val_indices.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test_indices.assign(order.begin() + n_train + n_val, order.end());
  out.train = select_rows(data, out.train_indices);
  out.val = select_rows(data, out.val_indices);
  out.test = select_rows(data, out.test_indices);
  return out;
}

Dataset load_table(const std::string& path, const TableSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_table: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw std::invalid_argument("load_table: empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line, schema.delimiter);

  auto column_of = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw std::invalid_argument("load_table: column '" + name + "' not found in '" + path + "'");
  };

  // an empty response name means the table carries features only (prediction
  // input); the response is filled with zeros
  const bool has_response = !schema.response.empty();
  const std::size_t y_col = has_response ? column_of(schema.response) : 0;
  std::vector<std::size_t> z_cols;
  for (const auto& name : schema.contextual) z_cols.push_back(column_of(name));

  std::vector<std::size_t> x_cols;
  std::vector<std::string> x_names;
  if (schema.explanatory.empty()) {
    std::vector<std::uint8_t> used(header.size(), 0);
    if (has_response) used[y_col] = 1;
    for (std::size_t c : z_cols) used[c] = 1;
    for (std::size_t j = 0; j < header.size(); ++j)
      if (!used[j]) {
        x_cols.push_back(j);
        x_names.push_back(header[j]);
      }
  } else {
    for (const auto& name : schema.explanatory) {
      x_cols.push_back(column_of(name));
      x_names.push_back(name);
    }
  }
  require(!x_cols.empty(), "load_table: no explanatory columns remain");

  std::vector<Vector> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size())
      throw std::invalid_argument("load_table: wrong cell count at line " +
                                  std::to_string(line_no));
    Vector row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) row[j] = parse_cell(cells[j], line_no);
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "load_table: no data rows in '" + path + "'");

  Dataset data;
  data.task = schema.task;
  data.y_name = schema.response;
  data.x_names = std::move(x_names);
  data.z_names = schema.contextual;
  data.y.resize(rows.size());
  data.X = Matrix(rows.size(), x_cols.size());
  data.Z = Matrix(rows.size(), z_cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.y[i] = has_response ? rows[i][y_col] : 0.0;
    for (std::size_t j = 0; j < x_cols.size(); ++j) data.X(i, j) = rows[i][x_cols[j]];
    for (std::size_t j = 0; j < z_cols.size(); ++j) data.Z(i, j) = rows[i][z_cols[j]];
  }
  data.validate();
  return data;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  require(ec == std::errc(), "format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_dataset(const std::string& path, const Dataset& data, char delimiter) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset: cannot open '" + path + "'");
  out << data.y_name;
  for (const auto& name : data.x_names) out << delimiter << name;
  for (const auto& name : data.z_names) out << delimiter << name;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << format_double(data.y[i]);
    for (std::size_t j = 0; j < data.p(); ++j) out << delimiter << format_double(data.X(i, j));
    for (std::size_t j = 0; j < data.m(); ++j) out << delimiter << format_double(data.Z(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_dataset: write failed for '" + path + "'");
}

void write_support(const std::string& path, const BoolMatrix& support,
                   const std::vector<std::string>& column_names, char delimiter) {
  require(column_names.size() == support.cols(), "write_support: name/column mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_support: cannot open '" + path + "'");
  for (std::size_t j = 0; j < column_names.size(); ++j) {
    if (j) out << delimiter;
    out << column_names[j];
  }
  out << '\n';
  for (std::size_t i = 0; i < support.rows(); ++i) {
    for (std::size_t j = 0; j < support.cols(); ++j) {
      if (j) out << delimiter;
      out << (support(i, j) ? '1' : '0');
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_support: write failed for '" + path + "'");
}

BoolMatrix load_support(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_support: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw std::invalid_argument("load_support: empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::size_t cols = split_line(line, delimiter).size();

  std::vector<std::vector<std::uint8_t>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line, delimiter);
    if (cells.size() != cols)
      throw std::invalid_argument("load_support: wrong cell count at line " +
                                  std::to_string(line_no));
    std::vector<std::uint8_t> row(cols);
    for (std::size_t j = 0; j < cols; ++j) {
      if (cells[j] == "0")
        row[j] = 0;
      else if (cells[j] == "1")
        row[j] = 1;
      else
        throw std::invalid_argument("load_support: cell must be 0 or 1 at line " +
                                    std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "load_support: no data rows");
  BoolMatrix support(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) support.set(i, j, rows[i][j] != 0);
  return support;
}

}  // namespace cslm
