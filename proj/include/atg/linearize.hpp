#pragma once

#include <random>
#include <string>
#include <variant>
#include <vector>

#include "atg/graph.hpp"

namespace atg {

enum class Special { Start, End, Sep };

struct RelSym {
  int rel_type_id = 0;
  auto operator<=>(const RelSym&) const = default;
};

/// One decoder output token: an entity span, a relation type, or a special token.
using Symbol = std::variant<EntitySpan, RelSym, Special>;

inline bool is_span(const Symbol& s) { return std::holds_alternative<EntitySpan>(s); }
inline bool is_relation(const Symbol& s) { return std::holds_alternative<RelSym>(s); }
inline bool is_special(const Symbol& s, Special which) {
  const auto* sp = std::get_if<Special>(&s);
  return sp != nullptr && *sp == which;
}

enum class Ordering { Sorted, Random };

struct GraphSequence {
  std::vector<Symbol> symbols;
  Ordering ordering = Ordering::Sorted;

  std::size_t size() const { return symbols.size(); }
  bool operator==(const GraphSequence&) const = default;
};

/// START, entities, SEP, (head, tail, relation)*, END.
/// Sorted order: entities by (start, end, type); relations by (head span, tail span, type).
/// Random order shuffles both lists independently with `rng`.
GraphSequence linearize(const IEGraph& graph, Ordering ordering, std::mt19937_64& rng);
GraphSequence linearize_sorted(const IEGraph& graph);

enum class ArgumentPolicy { Lenient, Strict };

/// Inverse of linearize. Lenient mode appends relation arguments that are missing
/// from the entity section; strict mode rejects them.
IEGraph delinearize(const GraphSequence& seq, ArgumentPolicy policy = ArgumentPolicy::Lenient);
IEGraph delinearize(const std::vector<Symbol>& symbols,
                    ArgumentPolicy policy = ArgumentPolicy::Lenient);

std::string render(const Symbol& sym, const Schema& schema);
std::string render(const std::vector<Symbol>& symbols, const Schema& schema);

}  // namespace atg
