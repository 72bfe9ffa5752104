#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "atg/checkpoint.hpp"
#include "atg/decode.hpp"
#include "atg/graph.hpp"
#include "atg/model.hpp"
#include "atg/train.hpp"

namespace atg {

using Json = nlohmann::json;

// Schema files:
//   {"entity_types": [...], "relation_types": [...],
//    "allowed_pairs": [{"head": "Peop", "tail": "Org", "relations": ["Work_For"]}]}
Json schema_to_json(const Schema& schema);
Schema schema_from_json(const Json& j);
Schema load_schema(const std::string& path);
void save_schema(const std::string& path, const Schema& schema);

// Dataset files hold one JSON record per line:
//   {"entities":[{"end":1,"start":0,"type":"Peop"}],"id":"s1",
//    "relations":[{"head":0,"tail":1,"type":"Work_For"}],"tokens":["Alain",...]}
// Entity "end" is INCLUSIVE. Relation head/tail index the record's entity list.
// An optional "linearization" string (written by `generate`) is ignored on read.
std::string format_example(const Example& example, const Schema& schema);
/// Parses and validates one record; errors name `line_no`.
Example parse_example(const std::string& line, const Schema& schema, int max_width, int line_no);
std::vector<Example> parse_dataset(const std::string& text, const Schema& schema, int max_width);
std::vector<Example> load_dataset(const std::string& path, const Schema& schema, int max_width);
std::string serialize_dataset(const std::vector<Example>& examples, const Schema& schema);
void save_dataset(const std::string& path, const std::vector<Example>& examples, const Schema& schema);

std::string read_file(const std::string& path);

struct DataPaths {
  std::string train;
  std::string dev;
  std::string test;
  std::string schema;
  bool operator==(const DataPaths&) const = default;
};

enum class Precision { Float32, Float64 };

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  DataPaths data;
  Precision precision = Precision::Float32;
  std::string output_dir = "runs";

  bool operator==(const RunConfig&) const = default;
};

Json run_config_to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::string& path);

Json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

/// Checkpoint with everything needed to rebuild a model: config, schema, input
/// vocabulary, step counter, and optionally optimizer moments.
struct BundleInfo {
  ModelConfig model;
  Schema schema;
  WordVocab vocab;
  int step = 0;
  Precision precision = Precision::Float32;
};

BundleInfo read_bundle_info(const std::string& path);

template <typename Scalar>
void save_bundle(const std::string& path, const Model<Scalar>& model, const Schema& schema, const WordVocab& vocab,
                 int step, const AdamW<Scalar>* optimizer = nullptr);

template <typename Scalar>
struct LoadedBundle {
  Model<Scalar> model;
  BundleInfo info;
};

template <typename Scalar>
LoadedBundle<Scalar> load_bundle(const std::string& path);

/// Restores Adam moments and the step counter saved alongside the parameters.
/// The optimizer must have been built over the loaded model.
template <typename Scalar>
void load_optimizer_state(const std::string& path, AdamW<Scalar>& optimizer);

}  // namespace atg
