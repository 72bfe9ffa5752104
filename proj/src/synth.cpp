#include "atg/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "atg/error.hpp"

namespace atg {

namespace {

struct RelationSlot {
  const char* head;
  const char* tail;
  const char* type;
};

struct Template {
  const char* text;
  std::vector<RelationSlot> relations;
  int min_entity_types;
  bool held_out;
};

const std::vector<Template>& templates() {
  static const std::vector<Template> all = {
      {"{P} works for {O} .", {{"P", "O", "Work_For"}}, 2, false},
      {"{P} killed {P2} .", {{"P", "P2", "Kill"}}, 2, false},
      {"{O} hired {P} last year .", {{"P", "O", "Work_For"}}, 2, false},
      {"{P} , an employee of {O} , killed {P2} .", {{"P", "O", "Work_For"}, {"P", "P2", "Kill"}}, 2, false},
      {"{P} met {P2} at {O} .", {}, 2, false},
      {"{P2} was murdered by {P} .", {{"P", "P2", "Kill"}}, 2, true},
      {"{P} joined {O} in 1998 .", {{"P", "O", "Work_For"}}, 2, true},
      {"According to {O} , {P} shot {P2} .", {{"P", "P2", "Kill"}}, 2, true},
      {"{P} lives in {L} .", {{"P", "L", "Live_In"}}, 3, false},
      {"{O} is based in {L} .", {{"O", "L", "OrgBased_In"}}, 3, false},
      {"{L} is a city in {L2} .", {{"L", "L2", "Located_In"}}, 3, false},
      {"{P} teaches at {O} in {L} .", {{"P", "O", "Work_For"}, {"O", "L", "OrgBased_In"}}, 3, false},
      {"{P} , a resident of {L} , works for {O} .", {{"P", "L", "Live_In"}, {"P", "O", "Work_For"}}, 3, true},
      {"{O} , headquartered in {L} , fired {P} .", {{"O", "L", "OrgBased_In"}}, 3, true},
  };
  return all;
}

const std::vector<std::string> kPeople = {
    "Alain",       "Alain Dupont", "Marie Curie", "John Smith",   "Ahmed Khan", "Li Wei",      "Sofia Rossi",
    "Carlos Mendes", "Anna",       "Kenji Sato",  "Fatima Zahra", "Peter",      "Olga Ivanova", "David Cohen"};
const std::vector<std::string> kOrgs = {"McGill University", "Acme Corp", "Google",  "Red Cross",
                                        "General Motors",    "Bank of Canada", "Reuters", "Siemens",
                                        "World Health Organization", "Toyota", "Oxfam", "NASA"};
const std::vector<std::string> kPlaces = {"Montreal", "Paris",  "New York", "Quebec", "Tokyo",   "Buenos Aires",
                                          "Berlin",   "Cairo",  "Lagos",    "Toronto", "Canada", "Japan"};

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

void check_types(int n) {
  if (n != 2 && n != 3) throw Error(Errc::InvalidConfig, "synthetic corpus supports 2 or 3 entity types");
}

Schema synth_schema(int n) {
  if (n == 2) {
    Schema s({"Peop", "Org"}, {"Work_For", "Kill"});
    s.allow(0, 1, 0);
    s.allow(0, 0, 1);
    return s;
  }
  Schema s({"Peop", "Org", "Loc"}, {"Work_For", "Kill", "Live_In", "OrgBased_In", "Located_In"});
  s.allow(0, 1, 0);
  s.allow(0, 0, 1);
  s.allow(0, 2, 2);
  s.allow(1, 2, 3);
  s.allow(2, 2, 4);
  return s;
}

class Generator {
 public:
  Generator(const SynthConfig& config, const Schema& schema) : config_(config), schema_(schema), rng_(config.seed) {}

  SynthSplit make_split(const std::string& prefix, int size, bool held_out) {
    std::vector<int> pool;
    for (int i = 0; i < synth_template_count(config_.num_entity_types); ++i) {
      if (config_.split_mode == SplitMode::Same || templates()[i].held_out == held_out) pool.push_back(i);
    }
    SynthSplit split;
    // Templates are dealt in shuffled rounds so every template appears
    // floor(size / |pool|) or ceil(size / |pool|) times.
    std::vector<int> deck;
    int attempts = 0;
    while (static_cast<int>(split.examples.size()) < size) {
      if (++attempts > 1000 * (size + 1)) throw Error(Errc::InvalidConfig, "cannot draw enough distinct sentences");
      if (deck.empty()) {
        deck = pool;
        std::shuffle(deck.begin(), deck.end(), rng_);
      }
      const int t = deck.back();
      Example ex = instantiate(t);
      const std::string key = join(ex.doc.tokens);
      if (!seen_.insert(key).second) continue;
      deck.pop_back();
      char id[32];
      std::snprintf(id, sizeof id, "%s-%04zu", prefix.c_str(), split.examples.size());
      ex.doc.id = id;
      validate_graph(ex.graph, ex.doc, 4, schema_);
      split.examples.push_back(std::move(ex));
      split.templates.push_back(t);
    }
    return split;
  }

 private:
  static std::string join(const std::vector<std::string>& tokens) {
    std::string s;
    for (const auto& t : tokens) s += t + ' ';
    return s;
  }

  const std::string& draw(const std::vector<std::string>& pool, const std::set<std::string>& taken) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (;;) {
      const std::string& name = pool[pick(rng_)];
      if (!taken.contains(name)) return name;
    }
  }

  Example instantiate(int index) {
    const Template& t = templates()[index];
    std::map<std::string, std::string> fill;
    std::set<std::string> taken;
    for (const auto& word : split_words(t.text)) {
      if (word.size() < 3 || word.front() != '{') continue;
      const std::string slot = word.substr(1, word.size() - 2);
      if (fill.contains(slot)) continue;
      const auto& pool = slot[0] == 'P' ? kPeople : slot[0] == 'O' ? kOrgs : kPlaces;
      fill[slot] = draw(pool, taken);
      taken.insert(fill[slot]);
    }
    Example ex;
    std::map<std::string, int> entity_of;
    for (const auto& word : split_words(t.text)) {
      if (word.size() < 3 || word.front() != '{') {
        ex.doc.tokens.push_back(word);
        continue;
      }
      const std::string slot = word.substr(1, word.size() - 2);
      const auto name = split_words(fill[slot]);
      const int start = ex.doc.length();
      ex.doc.tokens.insert(ex.doc.tokens.end(), name.begin(), name.end());
      const int type = slot[0] == 'P' ? 0 : slot[0] == 'O' ? 1 : 2;
      entity_of[slot] = static_cast<int>(ex.graph.entities.size());
      ex.graph.entities.push_back({start, ex.doc.length() - 1, type});
    }
    for (const auto& r : t.relations) {
      ex.graph.relations.push_back({entity_of.at(r.head), entity_of.at(r.tail), *schema_.relation_type_id(r.type)});
    }
    return ex;
  }

  const SynthConfig& config_;
  const Schema& schema_;
  std::mt19937_64 rng_;
  std::set<std::string> seen_;
};

}  // namespace

int synth_template_count(int num_entity_types) {
  check_types(num_entity_types);
  int n = 0;
  for (const auto& t : templates()) n += t.min_entity_types <= num_entity_types ? 1 : 0;
  return n;
}

std::string synth_template_text(int num_entity_types, int index) {
  if (index < 0 || index >= synth_template_count(num_entity_types)) {
    throw Error(Errc::IdOutOfRange, "template index out of range");
  }
  return templates()[index].text;
}

bool synth_template_held_out(int num_entity_types, int index) {
  if (index < 0 || index >= synth_template_count(num_entity_types)) {
    throw Error(Errc::IdOutOfRange, "template index out of range");
  }
  return templates()[index].held_out;
}

SynthCorpus make_synthetic(const SynthConfig& config) {
  check_types(config.num_entity_types);
  if (config.train_size < 0 || config.dev_size < 0 || config.test_size < 0) {
    throw Error(Errc::InvalidConfig, "split sizes must be non-negative");
  }
  SynthCorpus corpus;
  corpus.schema = synth_schema(config.num_entity_types);
  Generator gen(config, corpus.schema);
  corpus.train = gen.make_split("train", config.train_size, false);
  corpus.dev = gen.make_split("dev", config.dev_size, true);
  corpus.test = gen.make_split("test", config.test_size, true);
  return corpus;
}

}  // namespace atg
