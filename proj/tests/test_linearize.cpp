#include <gtest/gtest.h>

#include "atg/error.hpp"
#include "atg/linearize.hpp"
#include "test_util.hpp"

namespace atg {
namespace {

const Schema& running_schema() {
  static const Schema s({"Peop", "Org", "Loc"}, {"Work_For", "Based_In"});
  return s;
}

// "Alain Dupont works at McGill University in Montreal ." style graph.
IEGraph running_graph() {
  return {{{4, 5, 1}, {7, 7, 2}, {0, 1, 0}}, {{1, 1, 0}, {2, 0, 0}, {0, 1, 1}}};
}

TEST(Linearize, RunningExampleSorted) {
  IEGraph g{{{4, 5, 1}, {7, 7, 2}, {0, 1, 0}}, {{0, 1, 1}, {2, 0, 0}}};
  const auto seq = linearize_sorted(g);
  EXPECT_EQ(render(seq.symbols, running_schema()),
            "<START> (0,1,Peop) (4,5,Org) (7,7,Loc) <SEP> (0,1,Peop) (4,5,Org) Work_For (4,5,Org) (7,7,Loc) "
            "Based_In <END>");
}

TEST(Linearize, EmptyGraph) {
  const auto seq = linearize_sorted(IEGraph{});
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_TRUE(is_special(seq.symbols[0], Special::Start));
  EXPECT_TRUE(is_special(seq.symbols[1], Special::Sep));
  EXPECT_TRUE(is_special(seq.symbols[2], Special::End));
  EXPECT_EQ(delinearize(seq), IEGraph{});
}

TEST(Delinearize, RunningExample) {
  IEGraph g{{{0, 1, 0}, {4, 5, 1}, {7, 7, 2}}, {{0, 1, 0}, {1, 2, 1}}};
  const IEGraph back = delinearize(linearize_sorted(g));
  EXPECT_EQ(back.entities.size(), 3u);
  EXPECT_EQ(back.relations.size(), 2u);
  EXPECT_EQ(back, g);
}

TEST(Linearize, SequenceLength) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const IEGraph g = testing::random_graph(rng, 12, 4, 3, 3);
    const auto seq = linearize(g, i % 2 == 0 ? Ordering::Sorted : Ordering::Random, rng);
    EXPECT_EQ(seq.size(), 3 + g.entities.size() + 3 * g.relations.size());
  }
}

TEST(Linearize, SortedIsDeterministicAndOrderFree) {
  std::mt19937_64 rng(5);
  const IEGraph g = running_graph();
  IEGraph shuffled = g;
  std::reverse(shuffled.entities.begin(), shuffled.entities.end());
  for (auto& r : shuffled.relations) {
    r.head = static_cast<int>(g.entities.size()) - 1 - r.head;
    r.tail = static_cast<int>(g.entities.size()) - 1 - r.tail;
  }
  EXPECT_EQ(linearize(g, Ordering::Sorted, rng), linearize_sorted(shuffled));
}

TEST(Linearize, RandomOrderingVariesWithRng) {
  IEGraph g;
  for (int i = 0; i < 6; ++i) g.entities.push_back({i, i, 0});
  std::mt19937_64 rng(11);
  std::set<std::string> seen;
  const Schema schema({"E"}, {});
  for (int i = 0; i < 20; ++i) seen.insert(render(linearize(g, Ordering::Random, rng).symbols, schema));
  EXPECT_GT(seen.size(), 1u);
}

TEST(RoundTrip, TwoEntityRandomOrder) {
  std::mt19937_64 rng(1);
  const IEGraph g{{{0, 1, 0}, {4, 5, 1}}, {{0, 1, 0}}};
  for (int i = 0; i < 20; ++i) EXPECT_TRUE(same_graph(delinearize(linearize(g, Ordering::Random, rng)), g));
}

TEST(RoundTrip, RandomGraphsBothOrderings) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    const IEGraph g = testing::random_graph(rng, 15, 5, 4, 3);
    for (Ordering o : {Ordering::Sorted, Ordering::Random}) {
      EXPECT_TRUE(same_graph(delinearize(linearize(g, o, rng)), g));
    }
  }
}

TEST(Delinearize, LenientAppendsUnknownArguments) {
  const std::vector<Symbol> seq{Special::Start, EntitySpan{0, 1, 0}, Special::Sep, EntitySpan{0, 1, 0},
                                EntitySpan{3, 3, 1},  RelSym{0},          Special::End};
  const IEGraph g = delinearize(seq);
  ASSERT_EQ(g.entities.size(), 2u);
  EXPECT_EQ(g.entities[1], (EntitySpan{3, 3, 1}));
  EXPECT_EQ(g.relations, (std::vector<Relation>{{0, 1, 0}}));
  try {
    delinearize(seq, ArgumentPolicy::Strict);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownArgumentSpan);
  }
}

TEST(Delinearize, DeduplicatesEntitiesAndTriples) {
  const EntitySpan a{0, 0, 0}, b{2, 2, 0};
  const std::vector<Symbol> seq{Special::Start, a, b, a, Special::Sep, a, b, RelSym{0}, a, b, RelSym{0}, Special::End};
  const IEGraph g = delinearize(seq);
  EXPECT_EQ(g.entities.size(), 2u);
  EXPECT_EQ(g.relations.size(), 1u);
}

TEST(Delinearize, RejectsMalformed) {
  const EntitySpan a{0, 0, 0}, b{2, 2, 0};
  const std::vector<std::vector<Symbol>> bad = {
      {},
      {Special::Sep, Special::End},
      {Special::Start, a, Special::End},
      {Special::Start, Special::Sep},
      {Special::Start, Special::Sep, a, b, Special::End},
      {Special::Start, Special::Sep, a, RelSym{0}, Special::End},
      {Special::Start, a, Special::Sep, a, a, RelSym{0}, Special::End},
      {Special::Start, RelSym{0}, Special::Sep, Special::End},
      {Special::Start, Special::Sep, Special::End, Special::End},
  };
  for (const auto& s : bad) {
    try {
      delinearize(s);
      ADD_FAILURE() << "accepted " << render(s, Schema({"E"}, {"r"}));
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MalformedSequence);
    }
  }
}

TEST(Render, SymbolsUseSchemaNames) {
  const Schema& s = running_schema();
  EXPECT_EQ(render(Symbol{EntitySpan{0, 1, 0}}, s), "(0,1,Peop)");
  EXPECT_EQ(render(Symbol{RelSym{1}}, s), "Based_In");
  EXPECT_EQ(render(Symbol{Special::Sep}, s), "<SEP>");
}

}  // namespace
}  // namespace atg
