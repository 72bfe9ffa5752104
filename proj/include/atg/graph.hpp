#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace atg {

/// A whitespace-tokenized input sentence (or concatenation of sentences).
struct Document {
  std::string id;
  std::vector<std::string> tokens;

  int length() const { return static_cast<int>(tokens.size()); }
  bool operator==(const Document&) const = default;
};

/// Typed word span; `end` is inclusive.
struct EntitySpan {
  int start = 0;
  int end = 0;
  int type_id = 0;

  int width() const { return end - start + 1; }
  auto operator<=>(const EntitySpan&) const = default;
};

/// Directed typed edge between two entries of IEGraph::entities.
struct Relation {
  int head = 0;
  int tail = 0;
  int rel_type_id = 0;

  auto operator<=>(const Relation&) const = default;
};

struct IEGraph {
  std::vector<EntitySpan> entities;
  std::vector<Relation> relations;

  bool operator==(const IEGraph&) const = default;
};

/// A document paired with its annotation.
struct Example {
  Document doc;
  IEGraph graph;

  bool operator==(const Example&) const = default;
};

/// Relation triple with its arguments resolved to spans. Used wherever relation
/// identity must not depend on entity-list order.
struct ResolvedRelation {
  EntitySpan head;
  EntitySpan tail;
  int rel_type_id = 0;

  auto operator<=>(const ResolvedRelation&) const = default;
};

std::set<EntitySpan> entity_set(const IEGraph& graph);
std::set<ResolvedRelation> relation_set(const IEGraph& graph);

/// True iff both graphs hold the same entity and relation sets.
bool same_graph(const IEGraph& a, const IEGraph& b);

class Schema {
 public:
  using TypePair = std::pair<int, int>;

  Schema() = default;
  Schema(std::vector<std::string> entity_types, std::vector<std::string> relation_types);

  int num_entity_types() const { return static_cast<int>(entity_types_.size()); }
  int num_relation_types() const { return static_cast<int>(relation_types_.size()); }
  const std::vector<std::string>& entity_types() const { return entity_types_; }
  const std::vector<std::string>& relation_types() const { return relation_types_; }

  std::optional<int> entity_type_id(const std::string& name) const;
  std::optional<int> relation_type_id(const std::string& name) const;

  /// Restricts the relation types allowed between a (head type, tail type) pair.
  /// Once any pair is configured, unlisted pairs allow nothing.
  void allow(int head_type, int tail_type, int rel_type);
  bool has_allowed_pairs() const { return !allowed_pairs_.empty(); }
  const std::map<TypePair, std::set<int>>& allowed_pairs() const { return allowed_pairs_; }
  bool relation_allowed(int head_type, int tail_type, int rel_type) const;
  /// True iff at least one relation type may connect the two entity types.
  bool any_relation_allowed(int head_type, int tail_type) const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<std::string> entity_types_;
  std::vector<std::string> relation_types_;
  std::map<TypePair, std::set<int>> allowed_pairs_;
};

void validate_document(const Document& doc);

/// Checks every IEGraph invariant against `doc` and the span width limit.
/// Returns the graph unchanged; throws atg::Error on the first violation.
const IEGraph& validate_graph(const IEGraph& graph, const Document& doc, int max_width);

/// Same as above plus type ids checked against the schema.
const IEGraph& validate_graph(const IEGraph& graph, const Document& doc, int max_width,
                              const Schema& schema);

}  // namespace atg
