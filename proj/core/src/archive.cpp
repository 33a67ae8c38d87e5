#include "cslm/archive.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cslm/metrics.hpp"

namespace cslm {

namespace {

using nlohmann::json;

json layers_to_json(const std::vector<Layer>& layers) {
  json out = json::array();
  for (const auto& layer : layers) {
    json jl;
    jl["out"] = layer.weights.rows();
    jl["in"] = layer.weights.cols();
    jl["weights"] = layer.weights.values();
    jl["bias"] = layer.bias;
    out.push_back(std::move(jl));
  }
  return out;
}

std::vector<Layer> layers_from_json(const json& j) {
  std::vector<Layer> layers;
  for (const auto& jl : j) {
    Layer layer;
    const std::size_t out = jl.at("out").get<std::size_t>();
    const std::size_t in = jl.at("in").get<std::size_t>();
    layer.weights = Matrix(out, in);
    layer.weights.values() = jl.at("weights").get<Vector>();
    require(layer.weights.values().size() == out * in, "archive: weight count mismatch");
    layer.bias = jl.at("bias").get<Vector>();
    require(layer.bias.size() == out, "archive: bias length mismatch");
    layers.push_back(std::move(layer));
  }
  return layers;
}

json network_to_json(const NetworkModel& net) {
  json j;
  j["p"] = net.config.p;
  j["m"] = net.config.m;
  j["hidden_layers"] = net.config.hidden_layers;
  j["width"] = net.config.width;
  j["include_intercept"] = net.config.include_intercept;
  j["seed"] = net.config.seed;
  j["layers"] = layers_to_json(net.layers);
  return j;
}

NetworkModel network_from_json(const json& j) {
  NetworkModel net;
  net.config.p = j.at("p").get<std::size_t>();
  net.config.m = j.at("m").get<std::size_t>();
  net.config.hidden_layers = j.at("hidden_layers").get<std::size_t>();
  net.config.width = j.at("width").get<std::size_t>();
  net.config.include_intercept = j.at("include_intercept").get<bool>();
  net.config.seed = j.at("seed").get<std::uint64_t>();
  net.layers = layers_from_json(j.at("layers"));
  require(net.layers.size() == net.config.hidden_layers + 1, "archive: layer count mismatch");
  return net;
}

}  // namespace

std::string save_archive(const ModelArchive& archive) {
  const FittedModel& model = archive.model;
  json j;
  j["format"] = "cslm-archive";
  j["version"] = 1;
  j["task"] = to_string(model.task);
  j["network"] = network_to_json(model.network);
  if (model.polished) j["polished"] = network_to_json(*model.polished);
  j["theta_hat"] = model.theta_hat;
  j["lambda"] = model.lambda;
  j["gamma"] = model.gamma;
  if (model.groups) j["groups"] = model.groups->groups;
  if (model.signs) {
    j["signs"]["nonneg"] = model.signs->nonneg;
    j["signs"]["nonpos"] = model.signs->nonpos;
  }
  if (model.standardizer) {
    const Standardizer& s = *model.standardizer;
    j["standardizer"] = {{"x_means", s.x_means},
                         {"x_sds", s.x_sds},
                         {"z_means", s.z_means},
                         {"z_sds", s.z_sds}};
  }
  j["baseline_response_mean"] = model.baseline_response_mean;
  j["validation_loss"] = model.validation_loss;
  j["feature_names"] = {{"response", archive.y_name},
                        {"explanatory", archive.x_names},
                        {"contextual", archive.z_names}};
  j["provenance"] = {{"seed", archive.provenance.seed},
                     {"config_digest", archive.provenance.config_digest}};
  return j.dump(2);
}

ModelArchive parse_archive(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("archive: malformed JSON: ") + e.what());
  }
  require(j.value("format", "") == "cslm-archive", "archive: not a cslm archive");
  require(j.value("version", 0) == 1, "archive: unsupported version");

  ModelArchive archive;
  FittedModel& model = archive.model;
  model.task = task_from_string(j.at("task").get<std::string>());
  model.network = network_from_json(j.at("network"));
  if (j.contains("polished")) model.polished = network_from_json(j.at("polished"));
  model.theta_hat = j.at("theta_hat").get<double>();
  model.lambda = j.at("lambda").get<double>();
  model.gamma = j.at("gamma").get<double>();
  if (j.contains("groups")) {
    GroupStructure gs;
    gs.groups = j.at("groups").get<std::vector<std::vector<std::size_t>>>();
    gs.validate(model.network.config.p);
    model.groups = std::move(gs);
  }
  if (j.contains("signs")) {
    SignConstraints sc;
    sc.nonneg = j.at("signs").at("nonneg").get<std::vector<std::size_t>>();
    sc.nonpos = j.at("signs").at("nonpos").get<std::vector<std::size_t>>();
    sc.validate(model.network.config.p);
    model.signs = std::move(sc);
  }
  if (j.contains("standardizer")) {
    Standardizer s;
    const json& js = j.at("standardizer");
    s.x_means = js.at("x_means").get<Vector>();
    s.x_sds = js.at("x_sds").get<Vector>();
    s.z_means = js.at("z_means").get<Vector>();
    s.z_sds = js.at("z_sds").get<Vector>();
    require(s.x_means.size() == model.network.config.p, "archive: standardizer p mismatch");
    require(s.z_means.size() == model.network.config.m, "archive: standardizer m mismatch");
    model.standardizer = std::move(s);
  }
  model.baseline_response_mean = j.at("baseline_response_mean").get<double>();
  model.validation_loss = j.at("validation_loss").get<double>();
  if (j.contains("feature_names")) {
    const json& names = j.at("feature_names");
    archive.y_name = names.value("response", "y");
    archive.x_names = names.value("explanatory", std::vector<std::string>{});
    archive.z_names = names.value("contextual", std::vector<std::string>{});
  }
  if (j.contains("provenance")) {
    archive.provenance.seed = j.at("provenance").value("seed", std::uint64_t{0});
    archive.provenance.config_digest = j.at("provenance").value("config_digest", "");
  }
  return archive;
}

void write_archive(const std::string& path, const ModelArchive& archive) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_archive: cannot open '" + path + "'");
  out << save_archive(archive) << '\n';
  if (!out) throw std::runtime_error("write_archive: write failed for '" + path + "'");
}

ModelArchive load_archive(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_archive: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_archive(buffer.str());
}

std::string path_report_csv(const PathResult& path, const Dataset& train,
                            std::size_t selected_index) {
  require(selected_index < path.models.size(), "path_report: selected index out of range");
  std::string out =
      "lambda,gamma,validation_loss,avg_sparsity_count,avg_sparsity_proportion,selected\n";
  for (std::size_t t = 0; t < path.models.size(); ++t) {
    const FittedModel& model = path.models[t];
    const auto [count, proportion] = sparsity(model, train);
    out += format_double(model.lambda);
    out += ',';
    out += format_double(model.gamma);
    out += ',';
    out += format_double(model.validation_loss);
    out += ',';
    out += format_double(count);
    out += ',';
    out += format_double(proportion);
    out += ',';
    out += (t == selected_index ? '1' : '0');
    out += '\n';
  }
  return out;
}

std::string fnv1a_digest(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[hash & 0xF];
    hash >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

}  // namespace cslm
