#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "plr/attacks.hpp"
#include "plr/core_data.hpp"
#include "plr/trainer.hpp"

namespace plr {

using Json = nlohmann::json;

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
std::string format_fixed(double v, int decimals);

struct DatasetManifest {
  std::string name;
  std::string split;
  std::size_t n_instances = 0;
  std::size_t n_classes = 0;
  std::size_t feature_dim = 0;
  std::string features_path;  // relative to the manifest's directory unless absolute
  std::string labels_path;
  Json provenance = Json::object();

  Json to_json() const;
  static DatasetManifest from_json(const Json& j);
};

// Writes <dir>/<stem>.features.csv, <stem>.labels.csv and <stem>.manifest.json.
// The stem defaults to the dataset's split tag.
DatasetManifest save_dataset(const Dataset& d, const std::filesystem::path& dir,
                             const std::string& stem = "", const Json& provenance = Json::object());

std::filesystem::path manifest_path(const std::filesystem::path& dir, const std::string& stem);

DatasetManifest read_manifest(const std::filesystem::path& manifest_path);
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Label file: one instance per line, tokens 1 (Positive), 0 (Negative), ? (Unknown).
std::string format_labels(const TriStateLabelMatrix& m);
TriStateLabelMatrix parse_labels(const std::string& text, std::size_t n_instances,
                                 std::size_t n_classes, const std::string& origin);
std::string format_features(const Matrix& f);
Matrix parse_features(const std::string& text, std::size_t n_instances, std::size_t feature_dim,
                      const std::string& origin);

std::string read_text_file(const std::filesystem::path& p);
// Writes via a temporary file and rename so readers never see partial output.
void write_text_file(const std::filesystem::path& p, const std::string& content);
Json read_json_file(const std::filesystem::path& p);

// Structured-text configs; keys mirror the struct field names. Missing keys
// keep their defaults, unknown keys are rejected.
Json to_json(const LossConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const AttackSpec& a);
Json to_json(const HparamGrid& g);
LossConfig loss_config_from_json(const Json& j);
TrainConfig train_config_from_json(const Json& j);
AttackSpec attack_spec_from_json(const Json& j);
HparamGrid hparam_grid_from_json(const Json& j);

}  // namespace plr
