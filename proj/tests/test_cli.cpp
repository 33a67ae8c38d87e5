#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "cslm/archive.hpp"
#include "cslm/data.hpp"
#include "cslm/random.hpp"

#ifndef CSLM_CLI_PATH
#error "CSLM_CLI_PATH must be defined by the build"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(CSLM_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out);
  result.err = slurp(err);
  return result;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cslm_cli_" + std::to_string(cslm::Rng(std::random_device{}()).bits()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// tiny but learnable dataset files: train/val/test slices of one simulation
void make_split_files(const TempDir& dir, std::uint64_t seed = 5) {
  cslm::SimulationSpec spec;
  spec.p = 4;
  spec.m = 2;
  spec.n = 360;
  spec.seed = seed;
  spec.train_fraction = 0.5;
  spec.calibration_samples = 20000;
  const auto res = cslm::simulate(spec);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 180; ++i) idx.push_back(i);
  cslm::write_dataset((dir.path / "train.csv").string(), cslm::select_rows(res.data, idx));
  idx.clear();
  for (std::size_t i = 180; i < 270; ++i) idx.push_back(i);
  cslm::write_dataset((dir.path / "val.csv").string(), cslm::select_rows(res.data, idx));
  idx.clear();
  for (std::size_t i = 270; i < 360; ++i) idx.push_back(i);
  cslm::write_dataset((dir.path / "test.csv").string(), cslm::select_rows(res.data, idx));
}

const std::string kFitFlags =
    " --contextual z1,z2 --T 4 --max-epochs 30 --patience 5 --learning-rate 0.01 --quiet";

}  // namespace

TEST_CASE("simulate is deterministic across reruns and rejects bad targets") {
  TempDir dir;
  const std::string base = "simulate --p 5 --m 2 --n 300 --seed 9 --calibration-samples 20000";
  const auto a =
      run_cli(base + " --out " + (dir.path / "a.csv").string() + " --support-out " +
                  (dir.path / "sa.csv").string(),
              dir.path);
  REQUIRE(a.exit_code == 0);
  CHECK(a.out.find("kappa") == 0);
  const auto b =
      run_cli(base + " --out " + (dir.path / "b.csv").string() + " --support-out " +
                  (dir.path / "sb.csv").string(),
              dir.path);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(dir.path / "a.csv") == slurp(dir.path / "b.csv"));
  CHECK(slurp(dir.path / "sa.csv") == slurp(dir.path / "sb.csv"));
  CHECK(a.out == b.out);

  const auto bad = run_cli("simulate --p 2 --m 2 --n 100 --sparsity-targets 0.5,0.1 --out " +
                               (dir.path / "bad.csv").string(),
                           dir.path);
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("error: invalid-input:") == 0);
}

TEST_CASE("simulate classification emits a zero-one response") {
  TempDir dir;
  const auto res = run_cli(
      "simulate --p 3 --m 2 --n 120 --task classification --seed 2 --calibration-samples 20000"
      " --out " +
          (dir.path / "c.csv").string(),
      dir.path);
  REQUIRE(res.exit_code == 0);
  cslm::TableSchema schema;
  schema.response = "y";
  schema.contextual = {"z1", "z2"};
  schema.task = cslm::Task::classification;
  const auto data = cslm::load_table((dir.path / "c.csv").string(), schema);
  for (double v : data.y) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("fit rerun with the same seed reproduces the outputs byte for byte") {
  TempDir dir;
  make_split_files(dir);
  const std::string fit1 = "fit --train " + (dir.path / "train.csv").string() + " --val " +
                           (dir.path / "val.csv").string() + kFitFlags + " --seed 3 --out " +
                           (dir.path / "m1.json").string() + " --path-report " +
                           (dir.path / "r1.csv").string();
  const std::string fit2 = "fit --train " + (dir.path / "train.csv").string() + " --val " +
                           (dir.path / "val.csv").string() + kFitFlags + " --seed 3 --out " +
                           (dir.path / "m2.json").string() + " --path-report " +
                           (dir.path / "r2.csv").string();
  REQUIRE(run_cli(fit1, dir.path).exit_code == 0);
  REQUIRE(run_cli(fit2, dir.path).exit_code == 0);
  CHECK(slurp(dir.path / "r1.csv") == slurp(dir.path / "r2.csv"));
  CHECK(slurp(dir.path / "m1.json") == slurp(dir.path / "m2.json"));

  // archive round-trip through predict is byte-stable too
  const std::string pred = " --data " + (dir.path / "test.csv").string();
  REQUIRE(run_cli("predict --archive " + (dir.path / "m1.json").string() + pred + " --out " +
                      (dir.path / "p1.csv").string(),
                  dir.path)
              .exit_code == 0);
  REQUIRE(run_cli("predict --archive " + (dir.path / "m2.json").string() + pred + " --out " +
                      (dir.path / "p2.csv").string(),
                  dir.path)
              .exit_code == 0);
  CHECK(slurp(dir.path / "p1.csv") == slurp(dir.path / "p2.csv"));
}

TEST_CASE("constant mode produces Z-independent coefficients") {
  TempDir dir;
  make_split_files(dir);
  const std::string fit = "fit --train " + (dir.path / "train.csv").string() + " --val " +
                          (dir.path / "val.csv").string() + kFitFlags +
                          " --mode constant --seed 1 --out " + (dir.path / "m.json").string();
  REQUIRE(run_cli(fit, dir.path).exit_code == 0);
  REQUIRE(run_cli("predict --archive " + (dir.path / "m.json").string() + " --data " +
                      (dir.path / "test.csv").string() + " --out " +
                      (dir.path / "p.csv").string() + " --coefficients",
                  dir.path)
              .exit_code == 0);
  std::ifstream in(dir.path / "p.csv");
  std::string header, first, line;
  std::getline(in, header);
  std::getline(in, first);
  const std::string first_coeffs = first.substr(first.find(','));
  while (std::getline(in, line)) {
    CHECK(line.substr(line.find(',')) == first_coeffs);
  }
}

TEST_CASE("sign-constrained fit obeys the constraints on every training row") {
  TempDir dir;
  make_split_files(dir);
  const std::string fit = "fit --train " + (dir.path / "train.csv").string() + " --val " +
                          (dir.path / "val.csv").string() + kFitFlags +
                          " --nonneg x1 --nonpos x2 --seed 4 --out " +
                          (dir.path / "m.json").string();
  REQUIRE(run_cli(fit, dir.path).exit_code == 0);
  REQUIRE(run_cli("predict --archive " + (dir.path / "m.json").string() + " --data " +
                      (dir.path / "train.csv").string() + " --out " +
                      (dir.path / "p.csv").string() + " --coefficients",
                  dir.path)
              .exit_code == 0);
  std::ifstream in(dir.path / "p.csv");
  std::string line;
  std::getline(in, line);  // header: prediction,beta_x1,beta_x2,...
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // prediction
    std::getline(ss, cell, ',');
    CHECK(std::stod(cell) >= 0.0);  // beta_x1
    std::getline(ss, cell, ',');
    CHECK(std::stod(cell) <= 0.0);  // beta_x2
  }
}

TEST_CASE("grouped fit runs and archives the group structure") {
  TempDir dir;
  make_split_files(dir);
  const std::string fit = "fit --train " + (dir.path / "train.csv").string() + " --val " +
                          (dir.path / "val.csv").string() + kFitFlags +
                          " --groups \"x1,x2;x3,x4\" --seed 4 --out " +
                          (dir.path / "m.json").string();
  REQUIRE(run_cli(fit, dir.path).exit_code == 0);
  const auto archive = cslm::load_archive((dir.path / "m.json").string());
  REQUIRE(archive.model.groups.has_value());
  CHECK(archive.model.groups->groups.size() == 2);
}

TEST_CASE("a config file supplies flags with the command line winning") {
  TempDir dir;
  make_split_files(dir);
  {
    std::ofstream cfg(dir.path / "cfg.json");
    cfg << "{\"contextual\": [\"z1\",\"z2\"], \"T\": 4, \"max-epochs\": 30, \"patience\": 5,\n"
        << "  \"learning-rate\": 0.01, \"quiet\": true, \"seed\": 3}\n";
  }
  const std::string with_config = "fit --train " + (dir.path / "train.csv").string() +
                                  " --val " + (dir.path / "val.csv").string() + " --config " +
                                  (dir.path / "cfg.json").string() + " --out " +
                                  (dir.path / "mc.json").string() + " --path-report " +
                                  (dir.path / "rc.csv").string();
  REQUIRE(run_cli(with_config, dir.path).exit_code == 0);

  const std::string with_flags = "fit --train " + (dir.path / "train.csv").string() + " --val " +
                                 (dir.path / "val.csv").string() + kFitFlags +
                                 " --seed 3 --out " + (dir.path / "mf.json").string() +
                                 " --path-report " + (dir.path / "rf.csv").string();
  REQUIRE(run_cli(with_flags, dir.path).exit_code == 0);
  CHECK(slurp(dir.path / "rc.csv") == slurp(dir.path / "rf.csv"));
}

TEST_CASE("evaluate: intercept-only and all-zero archives, self stability") {
  TempDir dir;
  make_split_files(dir);

  // hand-built intercept-only archive: theta_hat saturates, bias = train mean
  cslm::TableSchema schema;
  schema.response = "y";
  schema.contextual = {"z1", "z2"};
  const auto train = cslm::load_table((dir.path / "train.csv").string(), schema);
  const auto [train_std, standardizer] = cslm::standardize(train);

  cslm::NetworkConfig config;
  config.p = 4;
  config.m = 2;
  config.hidden_layers = 0;
  cslm::ModelArchive archive;
  archive.model.network = cslm::init_network(config);
  archive.model.network.layers[0].bias[4] = cslm::mean(train.y);
  archive.model.theta_hat = std::numeric_limits<double>::max();
  archive.model.standardizer = standardizer;
  archive.model.baseline_response_mean = cslm::mean(train.y);
  archive.x_names = train.x_names;
  archive.z_names = train.z_names;
  cslm::write_archive((dir.path / "null.json").string(), archive);

  const auto res = run_cli("evaluate --archive " + (dir.path / "null.json").string() +
                               " --data " + (dir.path / "test.csv").string() + " --stability " +
                               (dir.path / "null.json").string() + " --out " +
                               (dir.path / "report.csv").string(),
                           dir.path);
  REQUIRE(res.exit_code == 0);
  std::ifstream in(dir.path / "report.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header ==
        "relative_loss,avg_sparsity_count,avg_sparsity_proportion,hamming_instability");
  std::stringstream ss(row);
  std::string cell;
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == 1.0);  // relative loss of the intercept-only model
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == 0.0);  // sparsity count
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == 0.0);  // sparsity proportion
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == 0.0);  // self-instability
}

TEST_CASE("errors surface as single machine-parsable lines with nonzero status") {
  TempDir dir;
  make_split_files(dir);

  // schema names an absent column
  const auto bad_schema = run_cli("fit --train " + (dir.path / "train.csv").string() +
                                      " --val " + (dir.path / "val.csv").string() +
                                      " --contextual nope --T 3 --quiet --out " +
                                      (dir.path / "m.json").string(),
                                  dir.path);
  CHECK(bad_schema.exit_code == 1);
  CHECK(bad_schema.err.find("error: invalid-input:") == 0);
  CHECK(bad_schema.err.find("nope") != std::string::npos);

  // missing file
  const auto no_file = run_cli("evaluate --archive /nonexistent.json --data " +
                                   (dir.path / "test.csv").string(),
                               dir.path);
  CHECK(no_file.exit_code == 1);
  CHECK(no_file.err.find("error: runtime:") == 0);

  // usage error
  const auto usage = run_cli("fit --no-such-flag", dir.path);
  CHECK(usage.exit_code == 2);
  CHECK(usage.err.find("error: usage:") == 0);
}
