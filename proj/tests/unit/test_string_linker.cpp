#include "normkit/errors.hpp"
#include "normkit/string_linker.hpp"
#include "normkit/unicode.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "synthetic.hpp"

using namespace normkit;

TEST(Levenshtein, KittenSitting) {
  EXPECT_EQ(oracle::levenshtein_recursive(U"kitten", U"sitting"), 3u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
}

TEST(Levenshtein, Trivial) {
  EXPECT_EQ(levenshtein("abc", "abc"), 0u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("Bauchweh", ""), 8u);
  EXPECT_EQ(levenshtein("ä", "a"), 1u);
}

TEST(Levenshtein, MetricPropertiesAgainstRecursion) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 300; ++i) {
    const auto a = synth::short_string(rng, 7);
    const auto b = synth::short_string(rng, 7);
    const auto c = synth::short_string(rng, 7);
    const auto ab = levenshtein(a, b);
    ASSERT_EQ(ab, oracle::levenshtein_recursive(a, b));
    EXPECT_EQ(ab, levenshtein(b, a));
    EXPECT_EQ(ab == 0, a == b);
    EXPECT_LE(levenshtein(a, c), ab + levenshtein(b, c));
  }
}

TEST(Levenshtein, BoundedIsExactWithinBound) {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 2000; ++i) {
    const auto a = synth::short_string(rng, 12);
    const auto b = synth::short_string(rng, 12);
    const std::size_t bound = rng() % 8;
    const auto exact = oracle::levenshtein_table(a, b);
    const auto got = levenshtein_bounded(a, b, bound);
    if (exact <= bound) {
      ASSERT_EQ(got, exact);
    } else {
      ASSERT_GT(got, bound);
    }
  }
}

TEST(NormalizedEditDistance, Definition) {
  EXPECT_DOUBLE_EQ(normalized_edit_distance("abc", "abd"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(normalized_edit_distance("abc", "abc"), 0.0);
  EXPECT_DOUBLE_EQ(normalized_edit_distance("a", "bcd"), 1.0);
  EXPECT_DOUBLE_EQ(normalized_edit_distance("", ""), 0.0);
  EXPECT_DOUBLE_EQ(normalized_edit_distance("ü", "u"), 1.0);
}

TEST(StringIndex, OneEntryPerName) {
  const auto kb = load_concept_table(synth::fixture("three_names.tsv"));
  EXPECT_EQ(build_string_index(kb).entries().size(), 3u);
}

TEST(StringIndex, RetiredConceptExcluded) {
  const auto kb = load_kb(synth::fixture("kb"));
  for (const auto& e : build_string_index(kb).entries()) EXPECT_NE(e.cui, "C0000014");
}

TEST(StringIndex, PyelonitisTerm) {
  KnowledgeBase kb;
  kb.add_name({"Pyelonitis", "C0000001", "X", true});
  kb.add_name({"Nierenstein", "C0000002", "X", true});
  const auto index = build_string_index(kb);
  EXPECT_EQ(index.entries()[0].normalized_term, "pyelon");
  const auto c = link_string(index, "Pyelonitis");
  EXPECT_EQ(c[0].cui, "C0000001");
  EXPECT_EQ(c[0].score, 0.0);
}

TEST(StringIndex, EmptyIndexRejected) {
  const auto index = build_string_index(KnowledgeBase{});
  EXPECT_THROW(link_string(index, "x"), InvalidInput);
}

TEST(LinkString, ExactMatchRanksFirst) {
  const auto kb = load_kb(synth::fixture("kb"));
  const auto index = build_string_index(kb);
  const auto c = link_string(index, "Herzinfarkt", 5);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[0].cui, "C0000006");
  EXPECT_EQ(c[0].rank, 1u);
  EXPECT_EQ(c[0].score, 0.0);
  check_candidate_list(c);
}

TEST(LinkString, FiveNameFixtureMatchesExhaustiveScoring) {
  KnowledgeBase kb;
  kb.add_name({"abcd", "C0000001", "X", false});
  kb.add_name({"abce", "C0000002", "X", false});
  kb.add_name({"abxx", "C0000002", "Y", false});
  kb.add_name({"zzzz", "C0000003", "X", false});
  kb.add_name({"abc", "C0000004", "X", false});
  StringPipeline pipe;
  pipe.stemmer = nullptr;
  const auto index = build_string_index(kb, pipe);
  std::vector<oracle::ScoredName> scored;
  for (const auto& e : index.entries()) {
    scored.push_back({e.cui, e.original_name,
                      -static_cast<double>(oracle::levenshtein_table(U"abcf", unicode::decode(e.normalized_term)))});
  }
  const auto expected = oracle::rank_all(scored, 10);
  const auto got = link_string(index, "abcf", 10);
  ASSERT_EQ(got.size(), expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].cui, expected[i].cui);
    EXPECT_EQ(got[i].name, expected[i].name);
    EXPECT_EQ(got[i].score, expected[i].score);
  }
  EXPECT_EQ(got[0].cui, "C0000001");
}

TEST(LinkString, SimilarityScore) {
  KnowledgeBase kb;
  kb.add_name({"abcd", "C0000001", "X", false});
  StringPipeline pipe;
  pipe.stemmer = nullptr;
  pipe.score = StringScore::similarity;
  const auto c = link_string(build_string_index(kb, pipe), "abce");
  EXPECT_DOUBLE_EQ(c[0].score, 0.75);
}

TEST(LinkString, RandomKbsMatchOracle) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto kb = synth::kb(30, 80, rng());
    const auto index = build_string_index(kb);
    for (int q = 0; q < 20; ++q) {
      const std::string query = synth::phrase(rng);
      const auto term = unicode::decode(index.term_for(query));
      std::vector<oracle::ScoredName> scored;
      for (const auto& e : index.entries()) {
        scored.push_back({e.cui, e.original_name,
                          -static_cast<double>(oracle::levenshtein_table(term, unicode::decode(e.normalized_term)))});
      }
      const std::size_t k = 1 + rng() % 40;
      const auto expected = oracle::rank_all(scored, k);
      const auto got = link_string(index, query, k);
      ASSERT_EQ(got.size(), expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        ASSERT_EQ(got[i].cui, expected[i].cui);
        ASSERT_EQ(got[i].name, expected[i].name);
        ASSERT_EQ(got[i].score, expected[i].score);
      }
    }
  }
}

TEST(LinkString, AllConceptsWhenKCoversThem) {
  const auto kb = load_kb(synth::fixture("kb"));
  const auto index = build_string_index(kb);
  const auto c = link_string(index, "Kopfweh", index.concept_count());
  std::set<std::string> cuis;
  for (const auto& x : c) cuis.insert(x.cui);
  EXPECT_EQ(cuis.size(), index.concept_count());
  EXPECT_EQ(c.size(), index.concept_count());
  for (const auto& x : c) EXPECT_GE(c[0].score, x.score);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i - 1].score, c[i].score);
}

TEST(LinkString, BatchIsOrderedAndThreadIndependent) {
  const auto kb = synth::kb(50, 120, 34);
  const auto index = build_string_index(kb);
  std::mt19937_64 rng(35);
  std::vector<MentionQuery> queries;
  for (int i = 0; i < 40; ++i) queries.push_back({"m" + std::to_string(i), synth::phrase(rng)});
  const auto one = link_string_batch(index, queries, 10, 1);
  const auto four = link_string_batch(index, queries, 10, 4);
  ASSERT_EQ(one.size(), queries.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].mention_id, queries[i].mention_id);
    EXPECT_EQ(one[i].candidates, four[i].candidates);
    EXPECT_EQ(one[i].candidates, link_string(index, queries[i].text, 10));
  }
}

TEST(Predictions, RoundTrip) {
  const auto dir = synth::temp_dir("pred");
  std::vector<Prediction> preds{{"p1.m1", {{"C0000001", "Kopfschmerz", -1.0, 1}, {"C0000002", "Migräne", -3.0, 2}}},
                                {"p1.m2", {}}};
  save_predictions(preds, (dir / "p.jsonl").string());
  const auto again = load_predictions((dir / "p.jsonl").string());
  ASSERT_EQ(again.size(), 2u);
  EXPECT_EQ(again[0].candidates, preds[0].candidates);
  EXPECT_TRUE(again[1].candidates.empty());
}

TEST(Predictions, RejectsBadRanksAndDuplicates) {
  EXPECT_THROW(check_candidate_list({{"C1", "a", 0, 2}}), InvalidInput);
  EXPECT_THROW(check_candidate_list({{"C1", "a", 0, 1}, {"C1", "b", 0, 2}}), InvalidInput);
  EXPECT_THROW(parse_prediction(R"({"mention_id": "m", "candidates": [{"cui": "C1", "name": "a", "score": 0, "rank": 3}]})"),
               DataError);
}
