// cslm: fits contextually sparse linear models and ships the surrounding
// experimental workflow. Subcommands: simulate, fit, predict, evaluate.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cslm/archive.hpp"
#include "cslm/data.hpp"
#include "cslm/metrics.hpp"
#include "cslm/training.hpp"

namespace {

using nlohmann::json;

// JSON config files share the archive's format family: one object whose keys
// are long option names without dashes. Values are scalars, or arrays for
// list options. Explicit command-line flags win over config values.
void apply_json_config(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");

  auto scalar = [](const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    CLI::Option* opt = sub.get_option_no_throw("--" + it.key());
    if (opt == nullptr)
      throw std::invalid_argument("config names unknown option '" + it.key() + "'");
    if (opt->count() > 0) continue;  // given explicitly
    if (it.value().is_array()) {
      for (const auto& v : it.value()) opt->add_result(scalar(v));
    } else {
      opt->add_result(scalar(it.value()));
    }
    opt->run_callback();
  }
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::size_t column_index(const std::vector<std::string>& names, const std::string& name) {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return j;
  throw std::invalid_argument("unknown explanatory column '" + name + "'");
}

char resolve_delimiter(const std::string& spec) {
  if (spec == "," || spec == "comma") return ',';
  if (spec == "tab" || spec == "\\t" || spec == "\t") return '\t';
  throw std::invalid_argument("delimiter must be ',' or 'tab'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  cslm::SimulationSpec spec;
  std::string task = "regression";
  std::string out;
  std::string support_out;
  std::string delimiter = ",";
};

int run_simulate(const SimulateArgs& args) {
  if (args.out.empty()) throw std::invalid_argument("--out is required");
  cslm::SimulationSpec spec = args.spec;
  spec.task = cslm::task_from_string(args.task);
  const char delim = resolve_delimiter(args.delimiter);

  const cslm::SimulationResult result = cslm::simulate(spec);
  cslm::write_dataset(args.out, result.data, delim);
  if (!args.support_out.empty())
    cslm::write_support(args.support_out, result.true_support, result.data.x_names, delim);

  std::cout << "kappa " << cslm::format_double(result.kappa) << "\n";
  double mean_target = 0.0;
  double mean_realized = 0.0;
  for (std::size_t j = 0; j < spec.p; ++j) {
    std::cout << "feature " << result.data.x_names[j] << " target "
              << cslm::format_double(result.sparsity_targets[j]) << " realized "
              << cslm::format_double(result.realized_sparsity[j]) << "\n";
    mean_target += result.sparsity_targets[j];
    mean_realized += result.realized_sparsity[j];
  }
  const double p = static_cast<double>(spec.p);
  std::cout << "mean sparsity target " << cslm::format_double(mean_target / p) << " realized "
            << cslm::format_double(mean_realized / p) << "\n";
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  std::string train_path, val_path;
  std::string response = "y";
  std::vector<std::string> contextual;
  std::vector<std::string> explanatory;
  std::string task = "regression";
  std::string mode = "contextual";
  std::size_t hidden_layers = 3;
  std::size_t width = 0;
  bool no_intercept = false;
  std::uint64_t seed = 0;
  std::size_t lambda_count = 50;
  double learning_rate = 0.001;
  std::size_t patience = 30;
  std::size_t max_epochs = 2000;
  std::size_t batch_size = 0;
  std::string groups_spec;
  std::vector<std::string> nonneg, nonpos;
  std::string out = "model.json";
  std::string path_report;
  std::string delimiter = ",";
  bool quiet = false;
  std::string config_digest;  // filled from the parsed command line
};

int run_fit(const FitArgs& args) {
  if (args.train_path.empty() || args.val_path.empty())
    throw std::invalid_argument("--train and --val are required");
  if (args.contextual.empty()) throw std::invalid_argument("--contextual is required");
  if (args.mode != "contextual" && args.mode != "constant")
    throw std::invalid_argument("mode must be 'contextual' or 'constant'");

  cslm::TableSchema schema;
  schema.response = args.response;
  schema.contextual = args.contextual;
  schema.explanatory = args.explanatory;
  schema.task = cslm::task_from_string(args.task);
  schema.delimiter = resolve_delimiter(args.delimiter);

  const cslm::Dataset train_raw = cslm::load_table(args.train_path, schema);
  const cslm::Dataset val_raw = cslm::load_table(args.val_path, schema);
  const auto [train, standardizer] = cslm::standardize(train_raw);
  const cslm::Dataset val = cslm::apply_standardizer(val_raw, standardizer);

  std::optional<cslm::GroupStructure> groups;
  if (!args.groups_spec.empty()) {
    cslm::GroupStructure gs;
    std::vector<bool> used(train.p(), false);
    for (const auto& group_text : split_list(args.groups_spec, ';')) {
      std::vector<std::size_t> group;
      for (const auto& name : split_list(group_text, ',')) {
        const std::size_t j = column_index(train.x_names, name);
        if (used[j]) throw std::invalid_argument("column '" + name + "' listed in two groups");
        used[j] = true;
        group.push_back(j);
      }
      gs.groups.push_back(std::move(group));
    }
    for (std::size_t j = 0; j < train.p(); ++j)  // leftovers become singletons
      if (!used[j]) gs.groups.push_back({j});
    gs.validate(train.p());
    groups = std::move(gs);
  }

  std::optional<cslm::SignConstraints> signs;
  if (!args.nonneg.empty() || !args.nonpos.empty()) {
    cslm::SignConstraints sc;
    for (const auto& name : args.nonneg) sc.nonneg.push_back(column_index(train.x_names, name));
    for (const auto& name : args.nonpos) sc.nonpos.push_back(column_index(train.x_names, name));
    sc.validate(train.p());
    signs = std::move(sc);
  }
  if (groups && signs)
    throw std::invalid_argument("groups combined with sign constraints are not supported");

  cslm::NetworkConfig net;
  net.p = train.p();
  net.m = train.m();
  net.hidden_layers = args.mode == "constant" ? 0 : args.hidden_layers;
  net.width = args.width;
  net.include_intercept = !args.no_intercept;
  net.seed = args.seed;

  cslm::OptimizerConfig opt;
  opt.learning_rate = args.learning_rate;
  opt.patience = args.patience;
  opt.max_epochs = args.max_epochs;
  opt.batch_size = args.batch_size;
  opt.shuffle_seed = args.seed;

  cslm::PathConfig path_config;
  path_config.lambda_count = args.lambda_count;

  cslm::PathResult path = cslm::fit_path(train, val, net, path_config, opt, groups, signs);
  for (std::size_t t = 0; t < path.models.size(); ++t) {
    cslm::relax(path.models[t], train, val, opt);
    if (!args.quiet)
      std::cerr << "lambda " << (t + 1) << "/" << path.models.size() << " = "
                << cslm::format_double(path.models[t].lambda)
                << " gamma=" << cslm::format_double(path.models[t].gamma)
                << " val=" << cslm::format_double(path.models[t].validation_loss) << "\n";
  }

  const std::size_t selected = cslm::select_index(path);
  const std::string report = cslm::path_report_csv(path, train, selected);
  if (!args.path_report.empty()) write_text(args.path_report, report);

  cslm::ModelArchive archive;
  archive.model = path.models[selected];
  archive.model.standardizer = standardizer;
  archive.x_names = train.x_names;
  archive.z_names = train.z_names;
  archive.y_name = train.y_name;
  archive.provenance.seed = args.seed;
  archive.provenance.config_digest = args.config_digest;
  cslm::write_archive(args.out, archive);

  std::cout << report;
  std::cout << "selected lambda " << cslm::format_double(archive.model.lambda) << " gamma "
            << cslm::format_double(archive.model.gamma) << " validation_loss "
            << cslm::format_double(archive.model.validation_loss) << "\n";
  return 0;
}

// ----------------------------------------------------------------- predict

struct PredictArgs {
  std::string archive_path, data_path, out;
  bool coefficients = false;
  std::string delimiter = ",";
};

cslm::Dataset load_for_archive(const cslm::ModelArchive& archive, const std::string& path,
                               char delim, bool need_response) {
  cslm::TableSchema schema;
  schema.response = need_response ? archive.y_name : "";
  schema.contextual = archive.z_names;
  schema.explanatory = archive.x_names;
  schema.task = archive.model.task;
  schema.delimiter = delim;
  cslm::Dataset data = cslm::load_table(path, schema);
  if (data.p() != archive.model.network.config.p || data.m() != archive.model.network.config.m)
    throw std::invalid_argument("data shape does not match the archive");
  return data;
}

int run_predict(const PredictArgs& args) {
  if (args.archive_path.empty() || args.data_path.empty() || args.out.empty())
    throw std::invalid_argument("--archive, --data, and --out are required");
  const cslm::ModelArchive archive = cslm::load_archive(args.archive_path);
  const char delim = resolve_delimiter(args.delimiter);
  const cslm::Dataset data = load_for_archive(archive, args.data_path, delim, false);

  const cslm::Vector predictions = cslm::predict(archive.model, data.X, data.Z);

  std::string out = "prediction";
  if (args.coefficients) {
    for (const auto& name : data.x_names) out += delim + ("beta_" + name);
    out += delim;
    out += "intercept";
  }
  out += '\n';

  cslm::CoefficientMatrix coeffs;
  if (args.coefficients) {
    cslm::Matrix Z = data.Z;
    if (archive.model.standardizer) {
      const auto& s = *archive.model.standardizer;
      for (std::size_t j = 0; j < Z.cols(); ++j)
        for (std::size_t i = 0; i < Z.rows(); ++i) Z(i, j) = (Z(i, j) - s.z_means[j]) / s.z_sds[j];
    }
    coeffs = cslm::inference_coefficients(archive.model, Z);
    if (archive.model.standardizer)
      coeffs = cslm::destandardize_coefficients(coeffs, *archive.model.standardizer);
  }

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out += cslm::format_double(predictions[i]);
    if (args.coefficients) {
      for (std::size_t j = 0; j < data.p(); ++j) {
        out += delim;
        out += cslm::format_double(coeffs.values(i, j));
      }
      out += delim;
      out += cslm::format_double(coeffs.intercept.empty() ? 0.0 : coeffs.intercept[i]);
    }
    out += '\n';
  }
  write_text(args.out, out);
  std::cout << "wrote " << predictions.size() << " predictions to " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string archive_path, data_path, out;
  std::string truth_path;
  std::string stability_path;
  std::string f1_mode = "pooled";
  std::string delimiter = ",";
};

int run_evaluate(const EvaluateArgs& args) {
  if (args.archive_path.empty() || args.data_path.empty())
    throw std::invalid_argument("--archive and --data are required");
  const cslm::ModelArchive archive = cslm::load_archive(args.archive_path);
  const char delim = resolve_delimiter(args.delimiter);
  const cslm::Dataset data = load_for_archive(archive, args.data_path, delim, true);

  cslm::EvaluationReport report;
  report.relative_loss = cslm::relative_loss(archive.model, data);
  const cslm::BoolMatrix support = cslm::model_support(archive.model, data);
  std::tie(report.avg_sparsity_count, report.avg_sparsity_proportion) = cslm::sparsity_of(support);

  if (!args.truth_path.empty()) {
    const cslm::BoolMatrix truth = cslm::load_support(args.truth_path, delim);
    const cslm::F1Mode mode = [&] {
      if (args.f1_mode == "pooled") return cslm::F1Mode::pooled;
      if (args.f1_mode == "per-observation") return cslm::F1Mode::per_observation;
      throw std::invalid_argument("f1-mode must be 'pooled' or 'per-observation'");
    }();
    report.f1 = cslm::selection_f1(support, truth, mode);
  }
  if (!args.stability_path.empty()) {
    const cslm::ModelArchive other = cslm::load_archive(args.stability_path);
    report.hamming_instability = cslm::hamming_instability(archive.model, other.model, data);
  }

  std::string header = "relative_loss";
  header += delim;
  header += "avg_sparsity_count";
  header += delim;
  header += "avg_sparsity_proportion";
  std::string row = cslm::format_double(report.relative_loss);
  row += delim;
  row += cslm::format_double(report.avg_sparsity_count);
  row += delim;
  row += cslm::format_double(report.avg_sparsity_proportion);
  if (report.f1) {
    header += delim;
    header += "f1";
    row += delim;
    row += cslm::format_double(*report.f1);
  }
  if (report.hamming_instability) {
    header += delim;
    header += "hamming_instability";
    row += delim;
    row += cslm::format_double(*report.hamming_instability);
  }
  const std::string text = header + "\n" + row + "\n";
  if (!args.out.empty()) write_text(args.out, text);
  std::cout << text;
  return 0;
}

// canonical digest of the effective (post-config) modeling choices; file
// locations and verbosity are not part of the model's identity
std::string digest_of(const CLI::App& sub) {
  static const std::vector<std::string> excluded = {"--train", "--val",    "--out",
                                                    "--path-report", "--config", "--quiet"};
  json j;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_name().empty() || opt->count() == 0) continue;
    bool skip = false;
    for (const auto& name : excluded) skip = skip || opt->get_name() == name;
    if (skip) continue;
    j[opt->get_name()] = opt->results();
  }
  return cslm::fnv1a_digest(j.dump());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contextually sparse linear models"};
  app.require_subcommand(1);

  SimulateArgs sim;
  FitArgs fit;
  PredictArgs pred;
  EvaluateArgs eval;

  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim_cmd->add_option("--p", sim.spec.p, "explanatory feature count");
  sim_cmd->add_option("--m", sim.spec.m, "contextual feature count");
  sim_cmd->add_option("--n", sim.spec.n, "observations");
  sim_cmd->add_option("--task", sim.task, "regression|classification");
  sim_cmd->add_option("--seed", sim.spec.seed, "generator seed");
  sim_cmd->add_option("--signal-variance", sim.spec.signal_variance, "target signal variance");
  sim_cmd->add_option("--sparsity-min", sim.spec.sparsity_min, "per-feature target lower bound");
  sim_cmd->add_option("--sparsity-max", sim.spec.sparsity_max, "per-feature target upper bound");
  sim_cmd->add_option("--sparsity-targets", sim.spec.sparsity_targets,
                      "explicit per-feature sparsity targets")
      ->delimiter(',');
  sim_cmd->add_option("--train-fraction", sim.spec.train_fraction,
                      "leading fraction used to calibrate the signal");
  sim_cmd->add_option("--calibration-samples", sim.spec.calibration_samples,
                      "Monte Carlo pool for radius calibration");
  sim_cmd->add_option("--out", sim.out, "dataset file");
  sim_cmd->add_option("--support-out", sim.support_out, "truth support file");
  sim_cmd->add_option("--delimiter", sim.delimiter, "',' or 'tab'");

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a regularization path");
  fit_cmd->add_option("--train", fit.train_path, "training table");
  fit_cmd->add_option("--val", fit.val_path, "validation table");
  fit_cmd->add_option("--response", fit.response, "response column");
  fit_cmd->add_option("--contextual", fit.contextual, "contextual columns")
      ->delimiter(',');
  fit_cmd
      ->add_option("--explanatory", fit.explanatory,
                   "explanatory columns (default: all remaining)")
      ->delimiter(',');
  fit_cmd->add_option("--task", fit.task, "regression|classification");
  fit_cmd->add_option("--mode", fit.mode, "contextual|constant");
  fit_cmd->add_option("--hidden-layers", fit.hidden_layers, "hidden layer count");
  fit_cmd->add_option("--width", fit.width, "hidden width (0 = parameter budget rule)");
  fit_cmd->add_flag("--no-intercept", fit.no_intercept, "drop the unpenalized intercept");
  fit_cmd->add_option("--seed", fit.seed, "initialization seed");
  fit_cmd->add_option("--T,--lambda-count", fit.lambda_count, "path length");
  fit_cmd->add_option("--learning-rate", fit.learning_rate, "Adam step size");
  fit_cmd->add_option("--patience", fit.patience, "epochs without improvement before stopping");
  fit_cmd->add_option("--max-epochs", fit.max_epochs, "epoch cap per fit");
  fit_cmd->add_option("--batch-size", fit.batch_size, "minibatch size (0 = full batch)");
  fit_cmd->add_option("--groups", fit.groups_spec,
                      "grouped explanatory columns, e.g. 'x1,x2;x3,x4'");
  fit_cmd->add_option("--nonneg", fit.nonneg, "columns constrained nonnegative")->delimiter(',');
  fit_cmd->add_option("--nonpos", fit.nonpos, "columns constrained nonpositive")->delimiter(',');
  fit_cmd->add_option("--out", fit.out, "archive file");
  fit_cmd->add_option("--path-report", fit.path_report, "per-lambda table file");
  fit_cmd->add_option("--delimiter", fit.delimiter, "',' or 'tab'");
  fit_cmd->add_flag("--quiet", fit.quiet, "suppress progress output");

  CLI::App* pred_cmd = app.add_subcommand("predict", "predict from an archive");
  pred_cmd->add_option("--archive", pred.archive_path, "model archive");
  pred_cmd->add_option("--data", pred.data_path, "input table");
  pred_cmd->add_option("--out", pred.out, "predictions file");
  pred_cmd->add_flag("--coefficients", pred.coefficients,
                     "also write per-row de-standardized coefficients");
  pred_cmd->add_option("--delimiter", pred.delimiter, "',' or 'tab'");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate an archive on a dataset");
  eval_cmd->add_option("--archive", eval.archive_path, "model archive");
  eval_cmd->add_option("--data", eval.data_path, "test table");
  eval_cmd->add_option("--truth", eval.truth_path, "true support table (enables F1)");
  eval_cmd->add_option("--stability", eval.stability_path,
                       "second archive for the Hamming instability");
  eval_cmd->add_option("--f1-mode", eval.f1_mode, "pooled|per-observation");
  eval_cmd->add_option("--out", eval.out, "report file");
  eval_cmd->add_option("--delimiter", eval.delimiter, "',' or 'tab'");

  std::string config_path;
  for (CLI::App* sub : {sim_cmd, fit_cmd, pred_cmd, eval_cmd})
    sub->add_option("--config", config_path, "JSON file supplying any flag");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    for (CLI::App* sub : {sim_cmd, fit_cmd, pred_cmd, eval_cmd})
      if (sub->parsed() && !config_path.empty()) apply_json_config(*sub, config_path);
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (fit_cmd->parsed()) {
      fit.config_digest = digest_of(*fit_cmd);
      return run_fit(fit);
    }
    if (pred_cmd->parsed()) return run_predict(pred);
    if (eval_cmd->parsed()) return run_evaluate(eval);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: invalid-input: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
