#include "atg/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "atg/error.hpp"

namespace atg {

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where,
                    Errc code = Errc::ParseError) {
  if (!j.is_object()) throw Error(code, where + " must be an object");
  std::set<std::string> names(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!names.contains(key)) throw Error(code, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string ordering_name(Ordering o) { return o == Ordering::Sorted ? "sorted" : "random"; }
Ordering ordering_from(const std::string& s) {
  if (s == "sorted") return Ordering::Sorted;
  if (s == "random") return Ordering::Random;
  throw Error(Errc::InvalidConfig, "ordering must be 'sorted' or 'random', got '" + s + "'");
}

std::string mode_name(DecodeMode m) { return m == DecodeMode::Greedy ? "greedy" : "nucleus"; }
DecodeMode mode_from(const std::string& s) {
  if (s == "greedy") return DecodeMode::Greedy;
  if (s == "nucleus") return DecodeMode::Nucleus;
  throw Error(Errc::InvalidConfig, "decode mode must be 'greedy' or 'nucleus', got '" + s + "'");
}

std::string precision_name(Precision p) { return p == Precision::Float32 ? "float32" : "float64"; }
Precision precision_from(const std::string& s) {
  if (s == "float32") return Precision::Float32;
  if (s == "float64") return Precision::Float64;
  throw Error(Errc::InvalidConfig, "precision must be 'float32' or 'float64', got '" + s + "'");
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::IoError, "cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Json schema_to_json(const Schema& schema) {
  Json j;
  j["entity_types"] = schema.entity_types();
  j["relation_types"] = schema.relation_types();
  if (schema.has_allowed_pairs()) {
    Json pairs = Json::array();
    for (const auto& [pair, rels] : schema.allowed_pairs()) {
      Json names = Json::array();
      for (int r : rels) names.push_back(schema.relation_types()[r]);
      pairs.push_back({{"head", schema.entity_types()[pair.first]},
                       {"tail", schema.entity_types()[pair.second]},
                       {"relations", names}});
    }
    j["allowed_pairs"] = pairs;
  }
  return j;
}

Schema schema_from_json(const Json& j) {
  try {
    reject_unknown(j, {"entity_types", "relation_types", "allowed_pairs"}, "schema");
    Schema schema(j.at("entity_types").get<std::vector<std::string>>(),
                  j.value("relation_types", std::vector<std::string>{}));
    if (j.contains("allowed_pairs")) {
      for (const auto& p : j.at("allowed_pairs")) {
        const auto head = schema.entity_type_id(p.at("head").get<std::string>());
        const auto tail = schema.entity_type_id(p.at("tail").get<std::string>());
        if (!head || !tail) throw Error(Errc::SchemaMismatch, "allowed_pairs names an unknown entity type");
        for (const auto& name : p.at("relations")) {
          const auto rel = schema.relation_type_id(name.get<std::string>());
          if (!rel) throw Error(Errc::SchemaMismatch, "allowed_pairs names an unknown relation type");
          schema.allow(*head, *tail, *rel);
        }
      }
    }
    return schema;
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("schema: ") + e.what());
  }
}

Schema load_schema(const std::string& path) {
  try {
    return schema_from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
}

void save_schema(const std::string& path, const Schema& schema) {
  write_file_atomic(path, schema_to_json(schema).dump(2) + "\n");
}

std::string format_example(const Example& ex, const Schema& schema) {
  Json j;
  j["id"] = ex.doc.id;
  j["tokens"] = ex.doc.tokens;
  Json ents = Json::array();
  for (const auto& e : ex.graph.entities) {
    ents.push_back({{"start", e.start}, {"end", e.end}, {"type", schema.entity_types().at(e.type_id)}});
  }
  Json rels = Json::array();
  for (const auto& r : ex.graph.relations) {
    rels.push_back({{"head", r.head}, {"tail", r.tail}, {"type", schema.relation_types().at(r.rel_type_id)}});
  }
  j["entities"] = ents;
  j["relations"] = rels;
  return j.dump();
}

Example parse_example(const std::string& line, const Schema& schema, int max_width, int line_no) {
  const std::string where = "line " + std::to_string(line_no);
  Example ex;
  try {
    const Json j = Json::parse(line);
    reject_unknown(j, {"id", "tokens", "entities", "relations", "linearization"}, where);
    ex.doc.id = j.value("id", std::to_string(line_no));
    ex.doc.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& e : j.value("entities", Json::array())) {
      const auto type = schema.entity_type_id(e.at("type").get<std::string>());
      if (!type) throw Error(Errc::SchemaMismatch, where + ": unknown entity type " + e.at("type").dump());
      ex.graph.entities.push_back({e.at("start").get<int>(), e.at("end").get<int>(), *type});
    }
    for (const auto& r : j.value("relations", Json::array())) {
      const auto type = schema.relation_type_id(r.at("type").get<std::string>());
      if (!type) throw Error(Errc::SchemaMismatch, where + ": unknown relation type " + r.at("type").dump());
      ex.graph.relations.push_back({r.at("head").get<int>(), r.at("tail").get<int>(), *type});
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, where + ": " + e.what());
  }
  try {
    validate_graph(ex.graph, ex.doc, max_width, schema);
  } catch (const Error& e) {
    throw Error(Errc::ValidationError, where + ": " + e.what());
  }
  return ex;
}

std::vector<Example> parse_dataset(const std::string& text, const Schema& schema, int max_width) {
  std::vector<Example> out;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_example(line, schema, max_width, line_no));
  }
  return out;
}

std::vector<Example> load_dataset(const std::string& path, const Schema& schema, int max_width) {
  try {
    return parse_dataset(read_file(path), schema, max_width);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string serialize_dataset(const std::vector<Example>& examples, const Schema& schema) {
  std::string out;
  for (const auto& ex : examples) {
    out += format_example(ex, schema);
    out += '\n';
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<Example>& examples, const Schema& schema) {
  write_file_atomic(path, serialize_dataset(examples, schema));
}

Json model_config_to_json(const ModelConfig& c) {
  return {{"dim", c.dim},
          {"enc_layers", c.enc_layers},
          {"dec_layers", c.dec_layers},
          {"heads", c.heads},
          {"ffn_mult", c.ffn_mult},
          {"max_width", c.max_width},
          {"num_entity_types", c.num_entity_types},
          {"num_relation_types", c.num_relation_types},
          {"word_vocab_size", c.word_vocab_size},
          {"max_positions", c.max_positions},
          {"dropout", c.dropout},
          {"use_positional", c.use_positional},
          {"use_structural", c.use_structural}};
}

ModelConfig model_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"dim", "enc_layers", "dec_layers", "heads", "ffn_mult", "max_width", "num_entity_types",
                  "num_relation_types", "word_vocab_size", "max_positions", "dropout", "use_positional",
                  "use_structural"},
                 "model", Errc::InvalidConfig);
  ModelConfig c;
  read_opt(j, "dim", c.dim);
  read_opt(j, "enc_layers", c.enc_layers);
  read_opt(j, "dec_layers", c.dec_layers);
  read_opt(j, "heads", c.heads);
  read_opt(j, "ffn_mult", c.ffn_mult);
  read_opt(j, "max_width", c.max_width);
  read_opt(j, "num_entity_types", c.num_entity_types);
  read_opt(j, "num_relation_types", c.num_relation_types);
  read_opt(j, "word_vocab_size", c.word_vocab_size);
  read_opt(j, "max_positions", c.max_positions);
  read_opt(j, "dropout", c.dropout);
  read_opt(j, "use_positional", c.use_positional);
  read_opt(j, "use_structural", c.use_structural);
  return c;
}

Json run_config_to_json(const RunConfig& rc) {
  const auto& t = rc.train;
  const auto& d = rc.decode;
  Json j;
  j["model"] = model_config_to_json(rc.model);
  j["train"] = {{"max_steps", t.max_steps},
                {"warmup_frac", t.warmup_frac},
                {"lr_encoder", t.base_lr.encoder},
                {"lr_decoder", t.base_lr.decoder},
                {"lr_other", t.base_lr.other},
                {"weight_decay", t.weight_decay},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"eps", t.eps},
                {"max_grad_norm", t.max_grad_norm},
                {"batch_size", t.batch_size},
                {"augment_max", t.augment_max},
                {"ordering", ordering_name(t.ordering)},
                {"word_dropout", t.word_dropout},
                {"seed", t.seed},
                {"eval_every", t.eval_every},
                {"log_every", t.log_every}};
  j["decode"] = {{"mode", mode_name(d.mode)},
                 {"top_p", d.top_p},
                 {"max_len", d.max_len},
                 {"seed", d.seed},
                 {"incremental", d.incremental},
                 {"free_arguments", d.grammar.free_arguments}};
  j["data"] = {{"train", rc.data.train}, {"dev", rc.data.dev}, {"test", rc.data.test}, {"schema", rc.data.schema}};
  j["precision"] = precision_name(rc.precision);
  j["output_dir"] = rc.output_dir;
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig rc;
  try {
    reject_unknown(j, {"model", "train", "decode", "data", "precision", "output_dir"}, "config",
                   Errc::InvalidConfig);
    if (j.contains("model")) rc.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) {
      const auto& t = j.at("train");
      reject_unknown(t,
                     {"max_steps", "warmup_frac", "lr_encoder", "lr_decoder", "lr_other", "weight_decay", "beta1",
                      "beta2", "eps", "max_grad_norm", "batch_size", "augment_max", "ordering", "word_dropout", "seed",
                      "eval_every", "log_every"},
                     "train", Errc::InvalidConfig);
      auto& c = rc.train;
      read_opt(t, "max_steps", c.max_steps);
      read_opt(t, "warmup_frac", c.warmup_frac);
      read_opt(t, "lr_encoder", c.base_lr.encoder);
      read_opt(t, "lr_decoder", c.base_lr.decoder);
      read_opt(t, "lr_other", c.base_lr.other);
      read_opt(t, "weight_decay", c.weight_decay);
      read_opt(t, "beta1", c.beta1);
      read_opt(t, "beta2", c.beta2);
      read_opt(t, "eps", c.eps);
      read_opt(t, "max_grad_norm", c.max_grad_norm);
      read_opt(t, "batch_size", c.batch_size);
      read_opt(t, "augment_max", c.augment_max);
      if (t.contains("ordering")) c.ordering = ordering_from(t.at("ordering").get<std::string>());
      read_opt(t, "word_dropout", c.word_dropout);
      read_opt(t, "seed", c.seed);
      read_opt(t, "eval_every", c.eval_every);
      read_opt(t, "log_every", c.log_every);
    }
    if (j.contains("decode")) {
      const auto& d = j.at("decode");
      reject_unknown(d, {"mode", "top_p", "max_len", "seed", "incremental", "free_arguments"}, "decode",
                     Errc::InvalidConfig);
      auto& c = rc.decode;
      if (d.contains("mode")) c.mode = mode_from(d.at("mode").get<std::string>());
      read_opt(d, "top_p", c.top_p);
      read_opt(d, "max_len", c.max_len);
      read_opt(d, "seed", c.seed);
      read_opt(d, "incremental", c.incremental);
      read_opt(d, "free_arguments", c.grammar.free_arguments);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d, {"train", "dev", "test", "schema"}, "data", Errc::InvalidConfig);
      read_opt(d, "train", rc.data.train);
      read_opt(d, "dev", rc.data.dev);
      read_opt(d, "test", rc.data.test);
      read_opt(d, "schema", rc.data.schema);
    }
    if (j.contains("precision")) rc.precision = precision_from(j.at("precision").get<std::string>());
    read_opt(j, "output_dir", rc.output_dir);
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("config: ") + e.what());
  }
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  try {
    return run_config_from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
}

namespace {

constexpr const char* kMomentPrefix = "adam.m/";
constexpr const char* kVelocityPrefix = "adam.v/";

BundleInfo info_from_metadata(const std::string& metadata) {
  try {
    const Json j = Json::parse(metadata);
    BundleInfo info;
    info.model = model_config_from_json(j.at("model"));
    info.schema = schema_from_json(j.at("schema"));
    info.vocab = WordVocab::from_words(j.at("vocab").get<std::vector<std::string>>());
    info.step = j.at("step").get<int>();
    info.precision = precision_from(j.at("precision").get<std::string>());
    return info;
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("checkpoint metadata: ") + e.what());
  }
}

}  // namespace

BundleInfo read_bundle_info(const std::string& path) { return info_from_metadata(read_checkpoint(path).metadata); }

template <typename Scalar>
void save_bundle(const std::string& path, const Model<Scalar>& model, const Schema& schema, const WordVocab& vocab,
                 int step, const AdamW<Scalar>* optimizer) {
  Json meta;
  meta["model"] = model_config_to_json(model.config());
  meta["schema"] = schema_to_json(schema);
  // Index 0 is the implicit unknown word.
  meta["vocab"] = std::vector<std::string>(vocab.words().begin() + 1, vocab.words().end());
  meta["step"] = step;
  meta["precision"] = precision_name(sizeof(Scalar) == 4 ? Precision::Float32 : Precision::Float64);
  CheckpointFile file;
  file.metadata = meta.dump();
  for (const auto& p : model.params().named()) file.arrays.push_back(to_record<Scalar>(p.name, p.tensor.value()));
  if (optimizer != nullptr) {
    for (const auto& s : optimizer->slots()) {
      file.arrays.push_back(to_record<Scalar>(kMomentPrefix + s.param.name, s.first_moment));
      file.arrays.push_back(to_record<Scalar>(kVelocityPrefix + s.param.name, s.second_moment));
    }
  }
  write_checkpoint(path, file);
}

template <typename Scalar>
LoadedBundle<Scalar> load_bundle(const std::string& path) {
  const CheckpointFile file = read_checkpoint(path);
  BundleInfo info = info_from_metadata(file.metadata);
  Model<Scalar> model(info.model, 0);
  for (auto& p : model.params().named()) {
    const ArrayRecord* rec = file.find(p.name);
    if (rec == nullptr) throw Error(Errc::ParseError, path + ": missing parameter " + p.name);
    Matrix<Scalar> m = from_record<Scalar>(*rec);
    if (m.rows() != p.tensor.rows() || m.cols() != p.tensor.cols()) {
      throw Error(Errc::ShapeMismatch, path + ": parameter " + p.name + " has the wrong shape");
    }
    p.tensor.mutable_value() = std::move(m);
  }
  return {std::move(model), std::move(info)};
}

template <typename Scalar>
void load_optimizer_state(const std::string& path, AdamW<Scalar>& optimizer) {
  const CheckpointFile file = read_checkpoint(path);
  const BundleInfo info = info_from_metadata(file.metadata);
  for (auto& s : optimizer.slots()) {
    const ArrayRecord* m = file.find(kMomentPrefix + s.param.name);
    const ArrayRecord* v = file.find(kVelocityPrefix + s.param.name);
    if (m == nullptr || v == nullptr) throw Error(Errc::ParseError, path + ": no optimizer state for " + s.param.name);
    s.first_moment = from_record<Scalar>(*m);
    s.second_moment = from_record<Scalar>(*v);
  }
  optimizer.set_steps_taken(info.step);
}

template void save_bundle(const std::string&, const Model<float>&, const Schema&, const WordVocab&, int,
                          const AdamW<float>*);
template void save_bundle(const std::string&, const Model<double>&, const Schema&, const WordVocab&, int,
                          const AdamW<double>*);
template LoadedBundle<float> load_bundle(const std::string&);
template LoadedBundle<double> load_bundle(const std::string&);
template void load_optimizer_state(const std::string&, AdamW<float>&);
template void load_optimizer_state(const std::string&, AdamW<double>&);

}  // namespace atg
