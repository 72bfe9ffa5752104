// Command-line entry point: synth | train | evaluate | generate | vocab-info | inspect.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "atg/decode.hpp"
#include "atg/error.hpp"
#include "atg/eval.hpp"
#include "atg/introspect.hpp"
#include "atg/io.hpp"
#include "atg/synth.hpp"
#include "atg/train.hpp"
#include "atg/vocab.hpp"

namespace {

using namespace atg;

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kBadInput = 3, kBadConfig = 4, kIo = 5, kRuntime = 6 };

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ParseError:
    case Errc::SchemaMismatch:
    case Errc::ValidationError:
    case Errc::OutOfRangeSpan:
    case Errc::SpanTooWide:
    case Errc::DuplicateEntity:
    case Errc::DuplicateRelation:
    case Errc::DanglingRelationIndex:
    case Errc::SelfRelation:
    case Errc::InvalidDocument:
    case Errc::InvalidSchema:
    case Errc::TooLong:
      return kBadInput;
    case Errc::InvalidConfig:
      return kBadConfig;
    case Errc::IoError:
      return kIo;
    default:
      return kRuntime;
  }
}

const char* category(int exit_code) {
  switch (exit_code) {
    case kBadInput:
      return "input error";
    case kBadConfig:
      return "config error";
    case kIo:
      return "i/o error";
    case kRuntime:
      return "runtime error";
    default:
      return "internal error";
  }
}

/// Output directory: ATG_OUTPUT_DIR overrides both the flag and the config.
std::string output_dir(const std::string& flag, const std::string& from_config) {
  if (const char* env = std::getenv("ATG_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return flag.empty() ? from_config : flag;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return dir.empty() || dir.back() == '/' ? dir + name : dir + "/" + name;
}

struct TrainFlags {
  std::string config;
  std::string out;
  std::optional<int> steps, seed, batch_size, augment_max, dec_layers, eval_every;
  std::optional<double> top_p;
  std::optional<std::string> ordering, precision;
  bool pos_off = false;
  bool struct_off = false;
};

RunConfig resolve_config(const TrainFlags& f) {
  RunConfig rc = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.steps) rc.train.max_steps = *f.steps;
  if (f.seed) {
    rc.train.seed = static_cast<std::uint64_t>(*f.seed);
    rc.decode.seed = static_cast<std::uint64_t>(*f.seed);
  }
  if (f.batch_size) rc.train.batch_size = *f.batch_size;
  if (f.augment_max) rc.train.augment_max = *f.augment_max;
  if (f.dec_layers) rc.model.dec_layers = *f.dec_layers;
  if (f.eval_every) rc.train.eval_every = *f.eval_every;
  if (f.top_p) {
    rc.decode.top_p = *f.top_p;
    rc.decode.mode = *f.top_p > 0.0 ? DecodeMode::Nucleus : DecodeMode::Greedy;
    if (*f.top_p <= 0.0) rc.decode.top_p = 1.0;
  }
  if (f.ordering) {
    Json j = run_config_to_json(rc);
    j["train"]["ordering"] = *f.ordering;
    rc = run_config_from_json(j);
  }
  if (f.precision) {
    Json j = run_config_to_json(rc);
    j["precision"] = *f.precision;
    rc = run_config_from_json(j);
  }
  if (f.pos_off) rc.model.use_positional = false;
  if (f.struct_off) rc.model.use_structural = false;
  rc.output_dir = output_dir(f.out, rc.output_dir);
  return rc;
}

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config, "Run config JSON");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--steps", f.steps, "Number of optimizer steps");
  cmd->add_option("--seed", f.seed, "Random seed for training and sampling");
  cmd->add_option("--batch-size", f.batch_size, "Samples per optimizer step");
  cmd->add_option("--B", f.augment_max, "Maximum sentences per augmented sample");
  cmd->add_option("--dec-layers", f.dec_layers, "Decoder depth");
  cmd->add_option("--eval-every", f.eval_every, "Evaluate on dev every N steps (0 = never)");
  cmd->add_option("--top-p", f.top_p, "Nucleus threshold; 0 selects greedy decoding");
  cmd->add_option("--ordering", f.ordering, "Target linearization: sorted | random");
  cmd->add_option("--precision", f.precision, "float32 | float64");
  cmd->add_flag("--pos-off", f.pos_off, "Disable decoder positional embeddings");
  cmd->add_flag("--struct-off", f.struct_off, "Disable structural embeddings");
}

// ---------------------------------------------------------------------------

struct SynthFlags {
  std::string out;
  SynthConfig config;
  std::string split = "same";
};

int run_synth(const SynthFlags& f) {
  SynthConfig config = f.config;
  if (f.split == "same") {
    config.split_mode = SplitMode::Same;
  } else if (f.split == "compositional") {
    config.split_mode = SplitMode::Compositional;
  } else {
    throw Error(Errc::InvalidConfig, "--split must be 'same' or 'compositional'");
  }
  const SynthCorpus corpus = make_synthetic(config);
  const std::string dir = output_dir(f.out, "data");
  save_schema(join_path(dir, "schema.json"), corpus.schema);
  save_dataset(join_path(dir, "train.jsonl"), corpus.train.examples, corpus.schema);
  save_dataset(join_path(dir, "dev.jsonl"), corpus.dev.examples, corpus.schema);
  save_dataset(join_path(dir, "test.jsonl"), corpus.test.examples, corpus.schema);
  std::cout << "wrote " << corpus.train.examples.size() << "/" << corpus.dev.examples.size() << "/"
            << corpus.test.examples.size() << " train/dev/test records to " << dir << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
int train_with(RunConfig rc) {
  if (rc.data.schema.empty() || rc.data.train.empty()) {
    throw Error(Errc::InvalidConfig, "config must name data.schema and data.train");
  }
  const Schema schema = load_schema(rc.data.schema);
  const auto train = load_dataset(rc.data.train, schema, rc.model.max_width);
  const auto dev = rc.data.dev.empty() ? std::vector<Example>{} : load_dataset(rc.data.dev, schema, rc.model.max_width);
  std::vector<std::vector<std::string>> sentences;
  for (const auto& ex : train) sentences.push_back(ex.doc.tokens);
  const WordVocab vocab = WordVocab::build(sentences);
  rc.model.num_entity_types = schema.num_entity_types();
  rc.model.num_relation_types = schema.num_relation_types();
  rc.model.word_vocab_size = vocab.size();
  rc.model.validate();
  rc.train.validate();

  const std::string& dir = rc.output_dir;
  write_file_atomic(join_path(dir, "config.json"), run_config_to_json(rc).dump(2) + "\n");
  Model<Scalar> model(rc.model, rc.train.seed);
  Trainer<Scalar> trainer(model, schema, vocab, rc.train, train, dev);
  std::ofstream log_file(join_path(dir, "train_log.jsonl"), std::ios::trunc);
  const TrainResult result = trainer.run([&](const std::string& line) {
    log_file << line << '\n';
    std::cerr << line << '\n';
  });
  save_bundle(join_path(dir, "last.ckpt"), model, schema, vocab, trainer.steps_done(), &trainer.optimizer());
  if (trainer.best_parameters()) {
    trainer.load_best();
    std::cerr << "best dev score " << result.best_score << " at step " << result.best_step << "\n";
  }
  save_bundle(join_path(dir, "model.ckpt"), model, schema, vocab, trainer.steps_done());
  std::cout << "saved " << join_path(dir, "model.ckpt") << "\n";
  return kOk;
}

int run_train(const TrainFlags& f) {
  const RunConfig rc = resolve_config(f);
  return rc.precision == Precision::Float32 ? train_with<float>(rc) : train_with<double>(rc);
}

// ---------------------------------------------------------------------------

struct DecodeFlags {
  std::string checkpoint;
  std::optional<double> top_p;
  std::optional<int> seed;
  std::optional<int> max_len;
  bool full_recompute = false;
};

DecodeConfig decode_config(const DecodeFlags& f) {
  DecodeConfig dc;
  if (f.top_p && *f.top_p > 0.0) {
    dc.mode = DecodeMode::Nucleus;
    dc.top_p = *f.top_p;
  }
  if (f.seed) dc.seed = static_cast<std::uint64_t>(*f.seed);
  if (f.max_len) dc.max_len = *f.max_len;
  dc.incremental = !f.full_recompute;
  dc.validate();
  return dc;
}

void add_decode_flags(CLI::App* cmd, DecodeFlags& f) {
  cmd->add_option("--top-p", f.top_p, "Nucleus threshold; 0 or absent selects greedy decoding");
  cmd->add_option("--seed", f.seed, "Sampling seed");
  cmd->add_option("--max-len", f.max_len, "Maximum output length including <START>");
  cmd->add_flag("--full-recompute", f.full_recompute, "Recompute the whole prefix at every step");
}

struct EvalFlags {
  std::string pred, gold, schema, format = "table";
  DecodeFlags decode;
};

void print_report(const ScoreReport& report, const std::string& format) {
  if (format == "json") {
    auto record = [](const char* metric, const MatchCounts& c, const PRF& s) {
      return Json{{"metric", metric},       {"tp", c.true_positives}, {"pred", c.predicted}, {"gold", c.gold},
                  {"precision", s.precision}, {"recall", s.recall},     {"f1", s.f1}};
    };
    std::cout << record("ENT", report.entity_counts, report.ent).dump() << "\n"
              << record("REL", report.relation_counts, report.rel).dump() << "\n"
              << record("REL+", report.strict_counts, report.rel_strict).dump() << "\n";
  } else {
    std::cout << format_report(report);
  }
}

template <typename Scalar>
ScoreReport evaluate_checkpoint(const EvalFlags& f) {
  auto bundle = load_bundle<Scalar>(f.decode.checkpoint);
  const auto gold = load_dataset(f.gold, bundle.info.schema, bundle.info.model.max_width);
  return evaluate_model(bundle.model, bundle.info.vocab, bundle.info.schema, gold, decode_config(f.decode));
}

int run_evaluate(const EvalFlags& f) {
  if (f.format != "table" && f.format != "json") throw Error(Errc::InvalidConfig, "--format must be table or json");
  ScoreReport report;
  if (!f.decode.checkpoint.empty()) {
    const BundleInfo info = read_bundle_info(f.decode.checkpoint);
    report = info.precision == Precision::Float32 ? evaluate_checkpoint<float>(f) : evaluate_checkpoint<double>(f);
  } else {
    if (f.pred.empty() || f.schema.empty()) {
      throw Error(Errc::InvalidConfig, "evaluate needs --checkpoint, or --pred with --schema");
    }
    const Schema schema = load_schema(f.schema);
    // Predictions are scored as given; only the width limit is relaxed.
    const int any_width = 1 << 20;
    const auto pred = load_dataset(f.pred, schema, any_width);
    const auto gold = load_dataset(f.gold, schema, any_width);
    if (pred.size() != gold.size()) {
      throw Error(Errc::ValidationError, "prediction and gold files differ in record count");
    }
    CorpusCounts counts;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i].doc.tokens != gold[i].doc.tokens) {
        throw Error(Errc::ValidationError, "record " + std::to_string(i + 1) + ": tokens differ from gold");
      }
      counts.add(pred[i].graph, gold[i].graph);
    }
    report = micro_f1(counts);
  }
  print_report(report, f.format);
  return kOk;
}

// ---------------------------------------------------------------------------

struct GenerateFlags {
  std::string input, text, out;
  DecodeFlags decode;
};

std::vector<Document> read_documents(const std::string& input, const std::string& text) {
  std::vector<Document> docs;
  if (!text.empty()) {
    Document d;
    d.id = "text";
    std::istringstream is(text);
    for (std::string w; is >> w;) d.tokens.push_back(w);
    docs.push_back(std::move(d));
    return docs;
  }
  if (input.empty()) throw Error(Errc::InvalidConfig, "give --input FILE or --text \"...\"");
  std::istringstream is(read_file(input));
  int line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      Document d;
      d.id = j.value("id", std::to_string(line_no));
      d.tokens = j.at("tokens").get<std::vector<std::string>>();
      docs.push_back(std::move(d));
    } catch (const Json::exception& e) {
      throw Error(Errc::ParseError, input + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

template <typename Scalar>
int generate_with(const GenerateFlags& f) {
  auto bundle = load_bundle<Scalar>(f.decode.checkpoint);
  const Schema& schema = bundle.info.schema;
  const DecodeConfig dc = decode_config(f.decode);
  std::string out;
  for (const auto& doc : read_documents(f.input, f.text)) {
    validate_document(doc);
    const auto ids = bundle.info.vocab.encode(doc.tokens);
    const DecodeResult result = generate(bundle.model, ids, schema, dc);
    Json j = Json::parse(format_example({doc, result.graph}, schema));
    j["linearization"] = render(result.sequence.symbols, schema);
    out += j.dump() + "\n";
  }
  if (f.out.empty()) {
    std::cout << out;
  } else {
    write_file_atomic(f.out, out);
  }
  return kOk;
}

int run_generate(const GenerateFlags& f) {
  const BundleInfo info = read_bundle_info(f.decode.checkpoint);
  return info.precision == Precision::Float32 ? generate_with<float>(f) : generate_with<double>(f);
}

// ---------------------------------------------------------------------------

struct VocabFlags {
  int L = 0, K = 0, C = 1, R = 0;
};

int run_vocab_info(const VocabFlags& f) {
  const VocabLayout layout(f.L, f.K, f.C, f.R);
  std::cout << "L = " << layout.length() << "\n"
            << "K = " << layout.max_width() << "\n"
            << "C = " << layout.num_entity_types() << "\n"
            << "R = " << layout.num_relation_types() << "\n"
            << "T = " << VocabLayout::kNumSpecial << "\n"
            << "V = " << layout.size() << "\n"
            << "realizable spans = " << layout.num_realizable_spans() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct InspectFlags {
  std::string checkpoint, text, input, out, kind = "self";
  int index = 0, layer = 0, head = -1;
  DecodeFlags decode;
};

void emit_csv(const std::string& path, const LabeledMatrix& m) {
  if (path.empty()) {
    std::cout << to_csv(m);
  } else {
    write_csv(path, m);
  }
}

template <typename Scalar>
int inspect_attention_with(const InspectFlags& f) {
  auto bundle = load_bundle<Scalar>(f.checkpoint);
  const auto docs = read_documents(f.input, f.text);
  if (f.index < 0 || f.index >= static_cast<int>(docs.size())) throw Error(Errc::IdOutOfRange, "--index out of range");
  const Document& doc = docs[f.index];
  DecodeConfig dc = decode_config(f.decode);
  dc.capture_attention = true;
  const auto result = generate(bundle.model, bundle.info.vocab.encode(doc.tokens), bundle.info.schema, dc);
  AttentionKind kind;
  if (f.kind == "self") {
    kind = AttentionKind::Self;
  } else if (f.kind == "cross") {
    kind = AttentionKind::Cross;
  } else {
    throw Error(Errc::InvalidConfig, "--kind must be self or cross");
  }
  emit_csv(f.out, export_attention(result, doc, bundle.info.schema, f.layer, f.head, kind));
  return kOk;
}

int run_inspect_attention(const InspectFlags& f) {
  const BundleInfo info = read_bundle_info(f.checkpoint);
  return info.precision == Precision::Float32 ? inspect_attention_with<float>(f) : inspect_attention_with<double>(f);
}

template <typename Scalar>
int inspect_struct_with(const InspectFlags& f) {
  const auto bundle = load_bundle<Scalar>(f.checkpoint);
  const StructSimilarity sim = export_struct_similarity(bundle.model.params());
  if (f.out.empty()) {
    std::cout << to_csv(sim.cosine) << "\n" << to_csv(sim.values);
  } else {
    write_csv(f.out + ".cosine.csv", sim.cosine);
    write_csv(f.out + ".values.csv", sim.values);
  }
  return kOk;
}

int run_inspect_struct(const InspectFlags& f) {
  const BundleInfo info = read_bundle_info(f.checkpoint);
  return info.precision == Precision::Float32 ? inspect_struct_with<float>(f) : inspect_struct_with<double>(f);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Autoregressive text-to-graph entity and relation extraction"};
  app.require_subcommand(1);

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic train/dev/test corpus and schema");
  synth_cmd->add_option("--out", synth.out, "Output directory (default: data)");
  synth_cmd->add_option("--train", synth.config.train_size, "Training sentences")->capture_default_str();
  synth_cmd->add_option("--dev", synth.config.dev_size, "Dev sentences")->capture_default_str();
  synth_cmd->add_option("--test", synth.config.test_size, "Test sentences")->capture_default_str();
  synth_cmd->add_option("--types", synth.config.num_entity_types, "Entity types: 2 or 3")->capture_default_str();
  synth_cmd->add_option("--split", synth.split, "same | compositional")->capture_default_str();
  synth_cmd->add_option("--seed", synth.config.seed, "Generator seed")->capture_default_str();

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a run config");
  add_train_flags(train_cmd, train);

  EvalFlags eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions, or a checkpoint on a gold file");
  eval_cmd->add_option("--gold", eval.gold, "Gold dataset")->required();
  eval_cmd->add_option("--pred", eval.pred, "Predicted dataset");
  eval_cmd->add_option("--schema", eval.schema, "Schema for --pred/--gold");
  eval_cmd->add_option("--checkpoint", eval.decode.checkpoint, "Model checkpoint to decode with");
  eval_cmd->add_option("--format", eval.format, "table | json")->capture_default_str();
  add_decode_flags(eval_cmd, eval.decode);

  GenerateFlags gen;
  auto* gen_cmd = app.add_subcommand("generate", "Predict graphs for documents");
  gen_cmd->add_option("--checkpoint", gen.decode.checkpoint, "Model checkpoint")->required();
  gen_cmd->add_option("--input", gen.input, "Dataset file; only tokens are read");
  gen_cmd->add_option("--text", gen.text, "A single whitespace-tokenized sentence");
  gen_cmd->add_option("--out", gen.out, "Output file (default: stdout)");
  add_decode_flags(gen_cmd, gen.decode);

  VocabFlags vocab;
  auto* vocab_cmd = app.add_subcommand("vocab-info", "Print the output vocabulary layout");
  vocab_cmd->add_option("--L", vocab.L, "Document length")->required();
  vocab_cmd->add_option("--K", vocab.K, "Maximum span width")->required();
  vocab_cmd->add_option("--C", vocab.C, "Entity types")->capture_default_str();
  vocab_cmd->add_option("--R", vocab.R, "Relation types")->capture_default_str();

  InspectFlags inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "Export attention maps or structure embeddings as CSV");
  inspect_cmd->require_subcommand(1);
  auto* attn_cmd = inspect_cmd->add_subcommand("attention", "Attention of one decoded document");
  attn_cmd->add_option("--checkpoint", inspect.checkpoint, "Model checkpoint")->required();
  attn_cmd->add_option("--doc", inspect.text, "A single whitespace-tokenized sentence");
  attn_cmd->add_option("--input", inspect.input, "Dataset file");
  attn_cmd->add_option("--index", inspect.index, "Record index in --input")->capture_default_str();
  attn_cmd->add_option("--layer", inspect.layer, "Decoder layer")->capture_default_str();
  attn_cmd->add_option("--head", inspect.head, "Head, or -1 for the head average")->capture_default_str();
  attn_cmd->add_option("--kind", inspect.kind, "self | cross")->capture_default_str();
  attn_cmd->add_option("--out", inspect.out, "CSV file (default: stdout)");
  add_decode_flags(attn_cmd, inspect.decode);
  auto* struct_cmd = inspect_cmd->add_subcommand("struct-sim", "Structure embedding cosine similarity and values");
  struct_cmd->add_option("--checkpoint", inspect.checkpoint, "Model checkpoint")->required();
  struct_cmd->add_option("--out", inspect.out, "Prefix for PREFIX.cosine.csv and PREFIX.values.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_evaluate(eval);
    if (*gen_cmd) return run_generate(gen);
    if (*vocab_cmd) return run_vocab_info(vocab);
    if (*attn_cmd) return run_inspect_attention(inspect);
    if (*struct_cmd) return run_inspect_struct(inspect);
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    std::cerr << "atg: " << category(code) << " [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return code;
  } catch (const std::exception& e) {
    std::cerr << "atg: " << category(kInternal) << ": " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
