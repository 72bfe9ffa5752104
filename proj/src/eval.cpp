#include "atg/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <tuple>

#include "atg/error.hpp"

namespace atg {

PRF prf(const MatchCounts& c) {
  PRF out;
  out.precision = c.predicted > 0 ? static_cast<double>(c.true_positives) / c.predicted : 0.0;
  out.recall = c.gold > 0 ? static_cast<double>(c.true_positives) / c.gold : 0.0;
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

namespace {

template <typename Set>
MatchCounts intersect(const Set& pred, const Set& gold) {
  MatchCounts c;
  c.predicted = static_cast<long long>(pred.size());
  c.gold = static_cast<long long>(gold.size());
  for (const auto& p : pred) c.true_positives += gold.contains(p) ? 1 : 0;
  return c;
}

using BoundaryKey = std::tuple<int, int, int, int, int>;

std::set<BoundaryKey> boundary_set(const IEGraph& g) {
  std::set<BoundaryKey> out;
  for (const auto& r : relation_set(g)) {
    out.emplace(r.head.start, r.head.end, r.tail.start, r.tail.end, r.rel_type_id);
  }
  return out;
}

}  // namespace

MatchCounts score_entities(const IEGraph& pred, const IEGraph& gold) {
  return intersect(entity_set(pred), entity_set(gold));
}

MatchCounts score_relations(const IEGraph& pred, const IEGraph& gold, bool strict) {
  if (strict) return intersect(relation_set(pred), relation_set(gold));
  return intersect(boundary_set(pred), boundary_set(gold));
}

void CorpusCounts::add(const IEGraph& pred, const IEGraph& gold) {
  entities += score_entities(pred, gold);
  relations += score_relations(pred, gold, false);
  relations_strict += score_relations(pred, gold, true);
}

ScoreReport micro_f1(const CorpusCounts& counts) {
  ScoreReport r;
  r.entity_counts = counts.entities;
  r.relation_counts = counts.relations;
  r.strict_counts = counts.relations_strict;
  r.ent = prf(counts.entities);
  r.rel = prf(counts.relations);
  r.rel_strict = prf(counts.relations_strict);
  return r;
}

ScoreReport evaluate_corpus(const std::vector<IEGraph>& preds, const std::vector<IEGraph>& golds) {
  if (preds.size() != golds.size()) {
    throw Error(Errc::ValidationError, "prediction count " + std::to_string(preds.size()) +
                                           " != gold count " + std::to_string(golds.size()));
  }
  CorpusCounts counts;
  for (std::size_t i = 0; i < preds.size(); ++i) counts.add(preds[i], golds[i]);
  return micro_f1(counts);
}

std::string format_report(const ScoreReport& report) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-6s %8s %8s %8s %8s %8s %8s\n", "metric", "tp", "pred", "gold", "P", "R", "F1");
  out += line;
  auto row = [&](const char* name, const MatchCounts& c, const PRF& s) {
    std::snprintf(line, sizeof line, "%-6s %8lld %8lld %8lld %8.1f %8.1f %8.1f\n", name, c.true_positives,
                  c.predicted, c.gold, 100.0 * s.precision, 100.0 * s.recall, 100.0 * s.f1);
    out += line;
  };
  row("ENT", report.entity_counts, report.ent);
  row("REL", report.relation_counts, report.rel);
  row("REL+", report.strict_counts, report.rel_strict);
  return out;
}

}  // namespace atg
