#pragma once

#include <string>
#include <vector>

#include "atg/graph.hpp"

namespace atg {

struct MatchCounts {
  long long true_positives = 0;
  long long predicted = 0;
  long long gold = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    true_positives += o.true_positives;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
  bool operator==(const MatchCounts&) const = default;
};

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PRF prf(const MatchCounts& counts);

/// Exact (start, end, type) matching under set semantics.
MatchCounts score_entities(const IEGraph& pred, const IEGraph& gold);

/// Boundaries mode (REL) compares (head span, tail span, relation type) without
/// entity types; strict mode (REL+) additionally requires both argument types.
MatchCounts score_relations(const IEGraph& pred, const IEGraph& gold, bool strict);

struct CorpusCounts {
  MatchCounts entities;
  MatchCounts relations;
  MatchCounts relations_strict;

  void add(const IEGraph& pred, const IEGraph& gold);
};

struct ScoreReport {
  MatchCounts entity_counts;
  MatchCounts relation_counts;
  MatchCounts strict_counts;
  PRF ent;
  PRF rel;
  PRF rel_strict;
};

ScoreReport micro_f1(const CorpusCounts& counts);
ScoreReport evaluate_corpus(const std::vector<IEGraph>& preds, const std::vector<IEGraph>& golds);

/// Fixed-column text table, scores in percent.
std::string format_report(const ScoreReport& report);

}  // namespace atg
