#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "atg/graph.hpp"
#include "atg/linearize.hpp"
#include "atg/vocab.hpp"

namespace atg {

/// What the decoder must emit next. Doubles as the structural-embedding label.
enum class Phase { Node = 0, Head = 1, Tail = 2, Rel = 3 };
inline constexpr int kNumPhases = 4;

struct GrammarOptions {
  /// Lets relation arguments be any realizable span instead of a declared entity.
  bool free_arguments = false;

  bool operator==(const GrammarOptions&) const = default;
};

struct DecodeState {
  Phase phase = Phase::Node;
  std::vector<EntitySpan> generated_entities;
  std::optional<EntitySpan> pending_head;
  std::optional<EntitySpan> pending_tail;
  bool finished = false;

  bool has_entity(const EntitySpan& e) const;
  bool operator==(const DecodeState&) const = default;
};

using LegalMask = std::vector<bool>;

DecodeState initial_state();

/// Legality of one symbol; agrees with legal_mask entry by entry.
bool is_legal(const DecodeState& state, const Symbol& sym, const VocabLayout& layout,
              const Schema& schema, const GrammarOptions& options = {});

LegalMask legal_mask(const DecodeState& state, const VocabLayout& layout, const Schema& schema,
                     const GrammarOptions& options = {});

DecodeState advance(const DecodeState& state, const Symbol& sym, const VocabLayout& layout,
                    const Schema& schema, const GrammarOptions& options = {});

/// Replays a sequence that starts with <START>. Returns the phase in which each
/// symbol was emitted (START counts as Node) and the final state.
struct Replay {
  std::vector<Phase> labels;
  std::vector<DecodeState> states_after;
};
Replay replay(const std::vector<Symbol>& symbols, const VocabLayout& layout, const Schema& schema,
              const GrammarOptions& options = {});

/// Exhaustive DFS over legal continuations of <START>, keeping every finished
/// sequence of length <= max_len. Throws EnumerationBudgetExceeded after
/// `node_budget` expansions.
std::vector<std::vector<Symbol>> enumerate_valid_sequences(const VocabLayout& layout,
                                                           const Schema& schema, std::size_t max_len,
                                                           std::size_t node_budget = 5'000'000,
                                                           const GrammarOptions& options = {});

}  // namespace atg
