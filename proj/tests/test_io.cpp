#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "atg/checkpoint.hpp"
#include "atg/error.hpp"
#include "atg/io.hpp"

namespace atg {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::IoError;
}

const char* kConllSchema = R"({
  "entity_types": ["Peop", "Org", "Loc", "Other"],
  "relation_types": ["Work_For", "Kill", "OrgBased_In", "Live_In", "Located_In"]
})";

TEST(Schema, ConllShapedSchemaLoads) {
  const Schema s = schema_from_json(Json::parse(kConllSchema));
  EXPECT_EQ(s.num_entity_types(), 4);
  EXPECT_EQ(s.num_relation_types(), 5);
  EXPECT_EQ(s.entity_type_id("Loc"), 2);
  EXPECT_EQ(s.relation_type_id("Located_In"), 4);
  EXPECT_FALSE(s.has_allowed_pairs());
}

TEST(Schema, AllowedPairsRoundTrip) {
  Schema s({"Peop", "Org"}, {"Work_For", "Kill"});
  s.allow(0, 1, 0);
  s.allow(0, 0, 1);
  const Schema back = schema_from_json(schema_to_json(s));
  EXPECT_EQ(back, s);
  EXPECT_TRUE(back.relation_allowed(0, 1, 0));
  EXPECT_FALSE(back.relation_allowed(1, 0, 0));

  TempDir dir("atg_test_schema");
  save_schema(dir.file("schema.json"), s);
  EXPECT_EQ(load_schema(dir.file("schema.json")), s);
}

TEST(Schema, RejectsMalformed) {
  EXPECT_EQ(code_of([] { schema_from_json(Json::parse(R"({"entity_types": ["A"], "extra": 1})")); }),
            Errc::ParseError);
  EXPECT_EQ(code_of([] { schema_from_json(Json::parse(R"({"relation_types": ["r"]})")); }), Errc::ParseError);
  EXPECT_EQ(code_of([] { schema_from_json(Json::parse(R"({"entity_types": ["A", "A"]})")); }),
            Errc::InvalidSchema);
}

class DatasetTest : public ::testing::Test {
 protected:
  Schema schema = schema_from_json(Json::parse(kConllSchema));
};

TEST_F(DatasetTest, ParsesRecords) {
  const std::string text =
      R"({"id":"d1","tokens":["Alain","Farhi","works","at","McGill","University","in","Montreal"],)"
      R"("entities":[{"start":0,"end":1,"type":"Peop"},{"start":4,"end":5,"type":"Org"},{"start":7,"end":7,"type":"Loc"}],)"
      R"("relations":[{"head":0,"tail":1,"type":"Work_For"},{"head":1,"tail":2,"type":"OrgBased_In"}]})"
      "\n\n"
      R"({"id":"d2","tokens":["Nothing","here"],"entities":[],"relations":[]})"
      "\n";
  const auto data = parse_dataset(text, schema, 4);
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data[0].doc.id, "d1");
  EXPECT_EQ(data[0].graph.entities[1], (EntitySpan{4, 5, 1}));
  EXPECT_EQ(data[0].graph.relations[1], (Relation{1, 2, 2}));
  EXPECT_TRUE(data[1].graph.entities.empty());
}

TEST_F(DatasetTest, ValidationErrorNamesTheLine) {
  const std::string good = R"({"id":"a","tokens":["x","y"],"entities":[],"relations":[]})";
  const std::string bad = R"({"id":"b","tokens":["x","y","z"],"entities":[{"start":2,"end":1,"type":"Peop"}],"relations":[]})";
  try {
    parse_dataset(good + "\n" + good + "\n" + bad + "\n", schema, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ValidationError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST_F(DatasetTest, RejectsUnknownNamesAndBadJson) {
  const std::string unknown_type =
      R"({"id":"a","tokens":["x"],"entities":[{"start":0,"end":0,"type":"Animal"}],"relations":[]})";
  EXPECT_EQ(code_of([&] { parse_dataset(unknown_type, schema, 4); }), Errc::SchemaMismatch);
  const std::string unknown_rel =
      R"({"id":"a","tokens":["x","y"],"entities":[{"start":0,"end":0,"type":"Peop"},{"start":1,"end":1,"type":"Org"}],)"
      R"("relations":[{"head":0,"tail":1,"type":"Owns"}]})";
  EXPECT_EQ(code_of([&] { parse_dataset(unknown_rel, schema, 4); }), Errc::SchemaMismatch);
  try {
    parse_dataset(R"({"id":"a","tokens":["x"],"entities":[],"relations":[]})"
                  "\n{not json\n",
                  schema, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  const std::string extra_key = R"({"id":"a","tokens":["x"],"entities":[],"relations":[],"lang":"en"})";
  EXPECT_EQ(code_of([&] { parse_dataset(extra_key, schema, 4); }), Errc::ParseError);
  const std::string too_wide =
      R"({"id":"a","tokens":["a","b","c","d","e"],"entities":[{"start":0,"end":4,"type":"Peop"}],"relations":[]})";
  EXPECT_EQ(code_of([&] { parse_dataset(too_wide, schema, 4); }), Errc::ValidationError);
  EXPECT_EQ(code_of([&] { load_dataset("/nonexistent/atg.jsonl", schema, 4); }), Errc::IoError);
}

TEST_F(DatasetTest, LinearizationFieldIsIgnoredOnRead) {
  const std::string line =
      R"({"id":"a","tokens":["x"],"entities":[{"start":0,"end":0,"type":"Peop"}],"relations":[],"linearization":"<START> ..."})";
  const auto data = parse_dataset(line, schema, 4);
  EXPECT_EQ(data[0].graph.entities.size(), 1u);
}

TEST_F(DatasetTest, CanonicalRoundTripIsByteIdentical) {
  Example a;
  a.doc.id = "doc-1";
  a.doc.tokens = {"He", "said", "\"hi\"", "to", "Zoë", "."};
  a.graph.entities = {{0, 0, 0}, {4, 4, 0}, {2, 3, 3}};
  a.graph.relations = {{0, 1, 1}};
  Example b;
  b.doc.id = "doc-2";
  b.doc.tokens = {"empty"};
  const std::string text = serialize_dataset({a, b}, schema);
  const auto parsed = parse_dataset(text, schema, 4);
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0], a);
  EXPECT_EQ(parsed[1], b);
  EXPECT_EQ(serialize_dataset(parsed, schema), text);

  TempDir dir("atg_test_dataset");
  save_dataset(dir.file("d.jsonl"), {a, b}, schema);
  EXPECT_EQ(read_file(dir.file("d.jsonl")), text);
  const auto loaded = load_dataset(dir.file("d.jsonl"), schema, 4);
  save_dataset(dir.file("e.jsonl"), loaded, schema);
  EXPECT_EQ(read_file(dir.file("e.jsonl")), text);
}

TEST(RunConfig, JsonRoundTripAndOverrides) {
  RunConfig c;
  c.model.dim = 32;
  c.model.use_structural = false;
  c.train.base_lr = {1e-3, 2e-3, 3e-3};
  c.train.ordering = Ordering::Random;
  c.train.word_dropout = 0.2;
  c.decode.mode = DecodeMode::Nucleus;
  c.decode.top_p = 0.9;
  c.data.train = "t.jsonl";
  c.precision = Precision::Float64;
  c.output_dir = "out";
  EXPECT_EQ(run_config_from_json(run_config_to_json(c)), c);

  const RunConfig partial = run_config_from_json(Json::parse(R"({"train": {"max_steps": 12}})"));
  EXPECT_EQ(partial.train.max_steps, 12);
  EXPECT_EQ(partial.model, ModelConfig{});

  EXPECT_EQ(code_of([] { run_config_from_json(Json::parse(R"({"train": {"max_stpes": 12}})")); }),
            Errc::InvalidConfig);
  EXPECT_EQ(code_of([] { run_config_from_json(Json::parse(R"({"precision": "float16"})")); }),
            Errc::InvalidConfig);
}

TEST(RunConfig, ShippedToyConfigLoads) {
  const std::string path = std::string(ATG_SOURCE_DIR) + "/configs/toy.json";
  const RunConfig c = load_run_config(path);
  EXPECT_EQ(c.model.dim, 64);
  EXPECT_EQ(c.model.enc_layers, 2);
  EXPECT_EQ(c.model.dec_layers, 2);
  EXPECT_EQ(c.train.augment_max, 2);
  EXPECT_EQ(c.train.max_steps, 2000);
  EXPECT_EQ(c.precision, Precision::Float32);
}

TEST(Checkpoint, BinaryRoundTrip) {
  TempDir dir("atg_test_ckpt");
  CheckpointFile f;
  f.metadata = R"({"k": 1})";
  Matrix<double> a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  Matrix<float> b(1, 2);
  b << 0.5f, -1.25f;
  f.arrays.push_back(to_record("a", a));
  f.arrays.push_back(to_record("b", b));
  f.arrays.push_back(to_record("empty", Matrix<double>(0, 4)));
  write_checkpoint(dir.file("x.ckpt"), f);
  const CheckpointFile g = read_checkpoint(dir.file("x.ckpt"));
  EXPECT_EQ(g, f);
  EXPECT_EQ(from_record<double>(*g.find("a")), a);
  EXPECT_EQ(from_record<double>(*g.find("b")), b.cast<double>());
  EXPECT_EQ(g.find("missing"), nullptr);

  write_text(dir.file("bad.ckpt"), "not a checkpoint");
  EXPECT_EQ(code_of([&] { read_checkpoint(dir.file("bad.ckpt")); }), Errc::ParseError);
  EXPECT_EQ(code_of([&] { read_checkpoint(dir.file("missing.ckpt")); }), Errc::IoError);
}

TEST(Checkpoint, TruncatedFileIsRejected) {
  TempDir dir("atg_test_trunc");
  CheckpointFile f;
  f.arrays.push_back(to_record("a", Matrix<double>(Matrix<double>::Ones(4, 4))));
  write_checkpoint(dir.file("x.ckpt"), f);
  const std::string bytes = read_file(dir.file("x.ckpt"));
  write_text(dir.file("y.ckpt"), bytes.substr(0, bytes.size() - 7));
  EXPECT_EQ(code_of([&] { read_checkpoint(dir.file("y.ckpt")); }), Errc::ParseError);
}

TEST(Bundle, ModelRoundTripAcrossPrecisions) {
  TempDir dir("atg_test_bundle");
  ModelConfig mc;
  mc.dim = 8;
  mc.heads = 2;
  mc.enc_layers = 1;
  mc.dec_layers = 1;
  mc.num_entity_types = 2;
  mc.num_relation_types = 1;
  mc.word_vocab_size = 3;
  const Model<float> model(mc, 9);
  const Schema schema({"A", "B"}, {"r"});
  const WordVocab vocab = WordVocab::from_words({"x", "y"});
  save_bundle(dir.file("m.ckpt"), model, schema, vocab, 42);

  const BundleInfo info = read_bundle_info(dir.file("m.ckpt"));
  EXPECT_EQ(info.model, mc);
  EXPECT_EQ(info.schema, schema);
  EXPECT_EQ(info.vocab.words(), vocab.words());
  EXPECT_EQ(info.step, 42);
  EXPECT_EQ(info.precision, Precision::Float32);

  const auto same = load_bundle<float>(dir.file("m.ckpt"));
  const auto wide = load_bundle<double>(dir.file("m.ckpt"));
  const auto a = model.params().named();
  const auto b = same.model.params().named();
  const auto c = wide.model.params().named();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].tensor.value(), b[i].tensor.value()) << a[i].name;
    EXPECT_EQ(a[i].tensor.value().cast<double>(), c[i].tensor.value()) << a[i].name;
  }
}

}  // namespace
}  // namespace atg
