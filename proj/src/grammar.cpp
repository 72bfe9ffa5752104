#include "atg/grammar.hpp"

#include <algorithm>
#include <string>

#include "atg/error.hpp"

namespace atg {

bool DecodeState::has_entity(const EntitySpan& e) const {
  return std::find(generated_entities.begin(), generated_entities.end(), e) != generated_entities.end();
}

DecodeState initial_state() { return DecodeState{}; }

namespace {

bool span_in_layout(const EntitySpan& e, const VocabLayout& layout) {
  return e.start >= 0 && e.start <= e.end && e.end < layout.length() && e.width() <= layout.max_width() &&
         e.type_id >= 0 && e.type_id < layout.num_entity_types();
}

bool valid_tail(const DecodeState& s, const EntitySpan& head, const EntitySpan& tail, const Schema& schema,
                const GrammarOptions& options) {
  if (tail == head) return false;
  if (!options.free_arguments && !s.has_entity(tail)) return false;
  return schema.any_relation_allowed(head.type_id, tail.type_id);
}

bool valid_head(const DecodeState& s, const EntitySpan& head, const VocabLayout& layout, const Schema& schema,
                const GrammarOptions& options) {
  if (options.free_arguments) {
    if (layout.num_relation_types() == 0) return false;
    // Some distinct span of a compatible type must exist.
    for (int c = 0; c < layout.num_entity_types(); ++c) {
      if (!schema.any_relation_allowed(head.type_id, c)) continue;
      if (c != head.type_id || layout.num_realizable_spans() > layout.num_entity_types()) return true;
    }
    return false;
  }
  if (!s.has_entity(head)) return false;
  return std::any_of(s.generated_entities.begin(), s.generated_entities.end(),
                     [&](const EntitySpan& t) { return valid_tail(s, head, t, schema, options); });
}

}  // namespace

bool is_legal(const DecodeState& state, const Symbol& sym, const VocabLayout& layout, const Schema& schema,
              const GrammarOptions& options) {
  if (state.finished) return false;
  const auto* span = std::get_if<EntitySpan>(&sym);
  if (span != nullptr && !span_in_layout(*span, layout)) return false;
  switch (state.phase) {
    case Phase::Node:
      if (span != nullptr) return !state.has_entity(*span);
      return is_special(sym, Special::Sep);
    case Phase::Head:
      if (span != nullptr) return valid_head(state, *span, layout, schema, options);
      return is_special(sym, Special::End);
    case Phase::Tail:
      return span != nullptr && valid_tail(state, *state.pending_head, *span, schema, options);
    case Phase::Rel: {
      const auto* rel = std::get_if<RelSym>(&sym);
      return rel != nullptr &&
             schema.relation_allowed(state.pending_head->type_id, state.pending_tail->type_id, rel->rel_type_id);
    }
  }
  return false;
}

LegalMask legal_mask(const DecodeState& state, const VocabLayout& layout, const Schema& schema,
                     const GrammarOptions& options) {
  if (state.finished) throw Error(Errc::FinishedState, "no legal symbols after <END>");
  LegalMask mask(static_cast<std::size_t>(layout.size()), false);
  switch (state.phase) {
    case Phase::Node:
      for (int id = 0; id < layout.num_span_ids(); ++id) {
        if (layout.realizable(id)) mask[id] = true;
      }
      for (const auto& e : state.generated_entities) mask[layout.span_id(e)] = false;
      mask[layout.special_id(Special::Sep)] = true;
      break;
    case Phase::Head:
    case Phase::Tail: {
      const bool head = state.phase == Phase::Head;
      auto accept = [&](const EntitySpan& e) {
        return head ? valid_head(state, e, layout, schema, options)
                    : valid_tail(state, *state.pending_head, e, schema, options);
      };
      if (options.free_arguments) {
        for (int id = 0; id < layout.num_span_ids(); ++id) {
          if (layout.realizable(id) && accept(std::get<EntitySpan>(layout.id_to_symbol(id)))) mask[id] = true;
        }
      } else {
        for (const auto& e : state.generated_entities) {
          if (accept(e)) mask[layout.span_id(e)] = true;
        }
      }
      if (head) mask[layout.special_id(Special::End)] = true;
      break;
    }
    case Phase::Rel:
      for (int r = 0; r < layout.num_relation_types(); ++r) {
        if (schema.relation_allowed(state.pending_head->type_id, state.pending_tail->type_id, r)) {
          mask[layout.relation_id(r)] = true;
        }
      }
      break;
  }
  return mask;
}

DecodeState advance(const DecodeState& state, const Symbol& sym, const VocabLayout& layout,
                    const Schema& schema, const GrammarOptions& options) {
  if (state.finished) throw Error(Errc::FinishedState, "advance after <END>");
  if (!is_legal(state, sym, layout, schema, options)) {
    throw Error(Errc::IllegalTransition, render(sym, schema) + " in phase " +
                                             std::to_string(static_cast<int>(state.phase)));
  }
  DecodeState next = state;
  switch (state.phase) {
    case Phase::Node:
      if (is_span(sym)) {
        next.generated_entities.push_back(std::get<EntitySpan>(sym));
      } else {
        next.phase = Phase::Head;
      }
      break;
    case Phase::Head:
      if (is_span(sym)) {
        next.pending_head = std::get<EntitySpan>(sym);
        next.phase = Phase::Tail;
      } else {
        next.finished = true;
      }
      break;
    case Phase::Tail:
      next.pending_tail = std::get<EntitySpan>(sym);
      next.phase = Phase::Rel;
      break;
    case Phase::Rel:
      next.pending_head.reset();
      next.pending_tail.reset();
      next.phase = Phase::Head;
      break;
  }
  return next;
}

Replay replay(const std::vector<Symbol>& symbols, const VocabLayout& layout, const Schema& schema,
              const GrammarOptions& options) {
  if (symbols.empty() || !is_special(symbols.front(), Special::Start)) {
    throw Error(Errc::IllegalTransition, "sequence must begin with <START>");
  }
  Replay out;
  DecodeState state = initial_state();
  out.labels.push_back(Phase::Node);
  out.states_after.push_back(state);
  for (std::size_t i = 1; i < symbols.size(); ++i) {
    out.labels.push_back(state.phase);
    state = advance(state, symbols[i], layout, schema, options);
    out.states_after.push_back(state);
  }
  return out;
}

std::vector<std::vector<Symbol>> enumerate_valid_sequences(const VocabLayout& layout, const Schema& schema,
                                                           std::size_t max_len, std::size_t node_budget,
                                                           const GrammarOptions& options) {
  std::vector<std::vector<Symbol>> out;
  std::vector<Symbol> prefix{Special::Start};
  std::size_t expanded = 0;

  auto dfs = [&](auto&& self, const DecodeState& state) -> void {
    if (++expanded > node_budget) {
      throw Error(Errc::EnumerationBudgetExceeded, "more than " + std::to_string(node_budget) + " states");
    }
    if (state.finished) {
      out.push_back(prefix);
      return;
    }
    if (prefix.size() >= max_len) return;
    const LegalMask mask = legal_mask(state, layout, schema, options);
    for (int id = 0; id < layout.size(); ++id) {
      if (!mask[id]) continue;
      Symbol sym = layout.id_to_symbol(id);
      prefix.push_back(sym);
      self(self, advance(state, sym, layout, schema, options));
      prefix.pop_back();
    }
  };
  dfs(dfs, initial_state());
  return out;
}

}  // namespace atg
