#pragma once

#include <cstdint>
#include <string>

#include "cslm/model.hpp"
#include "cslm/training.hpp"

namespace cslm {

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_digest;
};

struct ModelArchive {
  FittedModel model;
  Provenance provenance;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::string y_name = "y";
};

// JSON text with explicit shape fields and full-precision decimal floats.
// load(save(m)) reproduces predictions bitwise.
std::string save_archive(const ModelArchive& archive);
ModelArchive parse_archive(const std::string& json_text);

void write_archive(const std::string& path, const ModelArchive& archive);
ModelArchive load_archive(const std::string& path);

// Per-lambda table: lambda, gamma, validation_loss, avg sparsity on the
// training set, and a selection marker.
std::string path_report_csv(const PathResult& path, const Dataset& train,
                            std::size_t selected_index);

// FNV-1a over a canonical string; used for the config digest in provenance.
std::string fnv1a_digest(const std::string& text);

}  // namespace cslm
