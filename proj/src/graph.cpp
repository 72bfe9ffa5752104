#include "atg/graph.hpp"

#include <sstream>

#include "atg/error.hpp"

namespace atg {

std::set<EntitySpan> entity_set(const IEGraph& graph) {
  return {graph.entities.begin(), graph.entities.end()};
}

std::set<ResolvedRelation> relation_set(const IEGraph& graph) {
  std::set<ResolvedRelation> out;
  for (const auto& r : graph.relations) {
    out.insert({graph.entities.at(r.head), graph.entities.at(r.tail), r.rel_type_id});
  }
  return out;
}

bool same_graph(const IEGraph& a, const IEGraph& b) {
  return entity_set(a) == entity_set(b) && relation_set(a) == relation_set(b);
}

Schema::Schema(std::vector<std::string> entity_types, std::vector<std::string> relation_types)
    : entity_types_(std::move(entity_types)), relation_types_(std::move(relation_types)) {
  if (entity_types_.empty()) throw Error(Errc::InvalidSchema, "at least one entity type required");
  for (const auto* names : {&entity_types_, &relation_types_}) {
    std::set<std::string> seen;
    for (const auto& n : *names) {
      if (n.empty()) throw Error(Errc::InvalidSchema, "empty type name");
      if (!seen.insert(n).second) throw Error(Errc::InvalidSchema, "duplicate type name '" + n + "'");
    }
  }
}

std::optional<int> Schema::entity_type_id(const std::string& name) const {
  for (std::size_t i = 0; i < entity_types_.size(); ++i) {
    if (entity_types_[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::optional<int> Schema::relation_type_id(const std::string& name) const {
  for (std::size_t i = 0; i < relation_types_.size(); ++i) {
    if (relation_types_[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

void Schema::allow(int head_type, int tail_type, int rel_type) {
  if (head_type < 0 || head_type >= num_entity_types() || tail_type < 0 ||
      tail_type >= num_entity_types() || rel_type < 0 || rel_type >= num_relation_types()) {
    throw Error(Errc::InvalidSchema, "allowed pair references an unknown type");
  }
  allowed_pairs_[{head_type, tail_type}].insert(rel_type);
}

bool Schema::relation_allowed(int head_type, int tail_type, int rel_type) const {
  if (rel_type < 0 || rel_type >= num_relation_types()) return false;
  if (allowed_pairs_.empty()) return true;
  auto it = allowed_pairs_.find({head_type, tail_type});
  return it != allowed_pairs_.end() && it->second.contains(rel_type);
}

bool Schema::any_relation_allowed(int head_type, int tail_type) const {
  if (num_relation_types() == 0) return false;
  if (allowed_pairs_.empty()) return true;
  auto it = allowed_pairs_.find({head_type, tail_type});
  return it != allowed_pairs_.end() && !it->second.empty();
}

void validate_document(const Document& doc) {
  if (doc.tokens.empty()) throw Error(Errc::InvalidDocument, "document '" + doc.id + "' has no tokens");
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    if (doc.tokens[i].empty()) {
      throw Error(Errc::InvalidDocument, "empty token at position " + std::to_string(i));
    }
  }
}

namespace {

std::string describe(const EntitySpan& e) {
  std::ostringstream os;
  os << "(" << e.start << "," << e.end << "," << e.type_id << ")";
  return os.str();
}

}  // namespace

const IEGraph& validate_graph(const IEGraph& graph, const Document& doc, int max_width) {
  validate_document(doc);
  const int L = doc.length();
  std::set<EntitySpan> seen_entities;
  for (const auto& e : graph.entities) {
    if (e.start < 0 || e.end >= L || e.start > e.end) {
      throw Error(Errc::OutOfRangeSpan, "span " + describe(e) + " outside [0," + std::to_string(L) + ")");
    }
    if (e.width() > max_width) {
      throw Error(Errc::SpanTooWide, "span " + describe(e) + " wider than " + std::to_string(max_width));
    }
    if (e.type_id < 0) throw Error(Errc::OutOfRangeSpan, "negative type id in " + describe(e));
    if (!seen_entities.insert(e).second) throw Error(Errc::DuplicateEntity, describe(e));
  }
  const int n = static_cast<int>(graph.entities.size());
  std::set<Relation> seen_relations;
  for (const auto& r : graph.relations) {
    if (r.head < 0 || r.head >= n || r.tail < 0 || r.tail >= n) {
      throw Error(Errc::DanglingRelationIndex,
                  "relation (" + std::to_string(r.head) + "," + std::to_string(r.tail) + ")");
    }
    if (r.head == r.tail) throw Error(Errc::SelfRelation, "entity " + std::to_string(r.head));
    if (r.rel_type_id < 0) throw Error(Errc::DanglingRelationIndex, "negative relation type");
    if (!seen_relations.insert(r).second) {
      throw Error(Errc::DuplicateRelation,
                  "(" + std::to_string(r.head) + "," + std::to_string(r.tail) + "," +
                      std::to_string(r.rel_type_id) + ")");
    }
  }
  return graph;
}

const IEGraph& validate_graph(const IEGraph& graph, const Document& doc, int max_width,
                              const Schema& schema) {
  validate_graph(graph, doc, max_width);
  for (const auto& e : graph.entities) {
    if (e.type_id >= schema.num_entity_types()) {
      throw Error(Errc::SchemaMismatch, "entity type id " + std::to_string(e.type_id));
    }
  }
  for (const auto& r : graph.relations) {
    if (r.rel_type_id >= schema.num_relation_types()) {
      throw Error(Errc::SchemaMismatch, "relation type id " + std::to_string(r.rel_type_id));
    }
  }
  return graph;
}

}  // namespace atg
