#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "atg/eval.hpp"
#include "atg/grammar.hpp"
#include "atg/linearize.hpp"
#include "atg/model.hpp"

namespace atg {

enum class DecodeMode { Greedy, Nucleus };

struct DecodeConfig {
  DecodeMode mode = DecodeMode::Greedy;
  double top_p = 1.0;
  /// Maximum sequence length including <START>; 0 means 3 + 4 * L.
  int max_len = 0;
  std::uint64_t seed = 0;
  /// Use the key/value cache instead of recomputing the whole prefix each step.
  bool incremental = true;
  bool capture_attention = false;
  GrammarOptions grammar;

  void validate() const;
  bool operator==(const DecodeConfig&) const = default;
};

struct StepTrace {
  int id = 0;
  double probability = 0.0;
  int legal_count = 0;
  Phase phase = Phase::Node;
};

struct DecodeResult {
  GraphSequence sequence;
  IEGraph graph;
  /// Generation hit max_len; the sequence was closed and any partial triple dropped.
  bool truncated = false;
  std::vector<StepTrace> steps;
  /// Attention over the final sequence, when capture_attention is set.
  std::optional<AttentionMaps> attention;
  /// Symbols the attention rows refer to (possibly cut to max_positions).
  std::vector<Symbol> attention_symbols;
};

/// The truncated, renormalized nucleus: candidates sorted by descending
/// probability (ties to lower id), cut at the smallest prefix whose mass reaches
/// top_p. Always keeps at least one candidate.
std::vector<std::pair<int, double>> nucleus_distribution(std::span<const double> probs, std::span<const int> ids,
                                                         double top_p);

/// Samples an id from nucleus_distribution.
int nucleus_select(std::span<const double> probs, std::span<const int> ids, double top_p, std::mt19937_64& rng);

template <typename Scalar>
DecodeResult generate(const Model<Scalar>& model, std::span<const int> word_ids, const Schema& schema,
                      const DecodeConfig& config);

/// Decodes every example and scores the predictions against the gold graphs.
template <typename Scalar>
ScoreReport evaluate_model(const Model<Scalar>& model, const WordVocab& vocab, const Schema& schema,
                           std::span<const Example> examples, const DecodeConfig& config,
                           std::vector<IEGraph>* predictions = nullptr);

}  // namespace atg
