#include "atg/linearize.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "atg/error.hpp"

namespace atg {

GraphSequence linearize(const IEGraph& graph, Ordering ordering, std::mt19937_64& rng) {
  std::vector<int> entity_order(graph.entities.size());
  std::vector<int> relation_order(graph.relations.size());
  for (std::size_t i = 0; i < entity_order.size(); ++i) entity_order[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < relation_order.size(); ++i) relation_order[i] = static_cast<int>(i);

  const auto& ents = graph.entities;
  if (ordering == Ordering::Sorted) {
    std::sort(entity_order.begin(), entity_order.end(),
              [&](int a, int b) { return ents[a] < ents[b]; });
    std::sort(relation_order.begin(), relation_order.end(), [&](int a, int b) {
      const auto& ra = graph.relations[a];
      const auto& rb = graph.relations[b];
      auto key = [&](const Relation& r) {
        const auto& h = ents[r.head];
        const auto& t = ents[r.tail];
        return std::tuple(h.start, h.end, t.start, t.end, r.rel_type_id, h.type_id, t.type_id);
      };
      return key(ra) < key(rb);
    });
  } else {
    std::shuffle(entity_order.begin(), entity_order.end(), rng);
    std::shuffle(relation_order.begin(), relation_order.end(), rng);
  }

  GraphSequence seq;
  seq.ordering = ordering;
  seq.symbols.reserve(3 + ents.size() + 3 * graph.relations.size());
  seq.symbols.emplace_back(Special::Start);
  for (int i : entity_order) seq.symbols.emplace_back(ents[i]);
  seq.symbols.emplace_back(Special::Sep);
  for (int i : relation_order) {
    const auto& r = graph.relations[i];
    seq.symbols.emplace_back(ents[r.head]);
    seq.symbols.emplace_back(ents[r.tail]);
    seq.symbols.emplace_back(RelSym{r.rel_type_id});
  }
  seq.symbols.emplace_back(Special::End);
  return seq;
}

GraphSequence linearize_sorted(const IEGraph& graph) {
  std::mt19937_64 unused(0);
  return linearize(graph, Ordering::Sorted, unused);
}

IEGraph delinearize(const GraphSequence& seq, ArgumentPolicy policy) {
  return delinearize(seq.symbols, policy);
}

IEGraph delinearize(const std::vector<Symbol>& symbols, ArgumentPolicy policy) {
  auto malformed = [](const std::string& what, std::size_t pos) {
    return Error(Errc::MalformedSequence, what + " at position " + std::to_string(pos));
  };
  if (symbols.size() < 3 || !is_special(symbols.front(), Special::Start)) {
    throw malformed("expected <START>", 0);
  }
  if (!is_special(symbols.back(), Special::End)) throw malformed("expected <END>", symbols.size() - 1);

  IEGraph graph;
  std::map<EntitySpan, int> index;
  auto intern = [&](const EntitySpan& e) {
    auto [it, inserted] = index.emplace(e, static_cast<int>(graph.entities.size()));
    if (inserted) graph.entities.push_back(e);
    return it->second;
  };

  std::size_t pos = 1;
  for (; pos < symbols.size() && is_span(symbols[pos]); ++pos) intern(std::get<EntitySpan>(symbols[pos]));
  if (pos >= symbols.size() || !is_special(symbols[pos], Special::Sep)) throw malformed("expected <SEP>", pos);
  ++pos;

  std::set<Relation> seen;
  const std::size_t last = symbols.size() - 1;
  while (pos < last) {
    if (pos + 3 > last) throw malformed("truncated relation triple", pos);
    const auto* head = std::get_if<EntitySpan>(&symbols[pos]);
    const auto* tail = std::get_if<EntitySpan>(&symbols[pos + 1]);
    const auto* rel = std::get_if<RelSym>(&symbols[pos + 2]);
    if (head == nullptr || tail == nullptr || rel == nullptr) throw malformed("expected (span, span, relation)", pos);
    if (policy == ArgumentPolicy::Strict) {
      for (const auto* arg : {head, tail}) {
        if (!index.contains(*arg)) {
          throw Error(Errc::UnknownArgumentSpan, "relation argument at position " + std::to_string(pos) +
                                                     " not declared before <SEP>");
        }
      }
    }
    if (*head == *tail) throw malformed("relation with identical head and tail", pos);
    Relation r{intern(*head), intern(*tail), rel->rel_type_id};
    if (seen.insert(r).second) graph.relations.push_back(r);
    pos += 3;
  }
  return graph;
}

std::string render(const Symbol& sym, const Schema& schema) {
  struct Visitor {
    const Schema& schema;
    std::string operator()(const EntitySpan& e) const {
      std::ostringstream os;
      os << "(" << e.start << "," << e.end << ",";
      if (e.type_id >= 0 && e.type_id < schema.num_entity_types()) {
        os << schema.entity_types()[e.type_id];
      } else {
        os << e.type_id;
      }
      os << ")";
      return os.str();
    }
    std::string operator()(const RelSym& r) const {
      if (r.rel_type_id >= 0 && r.rel_type_id < schema.num_relation_types()) {
        return schema.relation_types()[r.rel_type_id];
      }
      return "rel" + std::to_string(r.rel_type_id);
    }
    std::string operator()(Special s) const {
      switch (s) {
        case Special::Start: return "<START>";
        case Special::End: return "<END>";
        case Special::Sep: return "<SEP>";
      }
      return "<?>";
    }
  };
  return std::visit(Visitor{schema}, sym);
}

std::string render(const std::vector<Symbol>& symbols, const Schema& schema) {
  std::string out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i != 0) out += ' ';
    out += render(symbols[i], schema);
  }
  return out;
}

}  // namespace atg
