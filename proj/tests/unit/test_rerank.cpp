#include "normkit/errors.hpp"
#include "normkit/rerank.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <fstream>
#include <random>
#include <set>

#include "synthetic.hpp"

using namespace normkit;

namespace {

CandidateList candidates(std::size_t n) {
  CandidateList out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({synth::cui(i + 1), "name" + std::to_string(i), 0.0, i + 1});
  return out;
}

class FnScorer final : public Scorer {
 public:
  explicit FnScorer(std::function<double(const Candidate&)> fn) : fn_(std::move(fn)) {}
  double score(const RerankContext&, const Candidate& c) const override { return fn_(c); }

 private:
  std::function<double(const Candidate&)> fn_;
};

std::vector<std::string> cuis_of(const CandidateList& list) {
  std::vector<std::string> out;
  for (const auto& c : list) out.push_back(c.cui);
  return out;
}

Post post(const std::string& id, const std::string& text, const std::string& gold) {
  Post p{id, text, {}};
  Mention m;
  m.id = id + ".m";
  m.start = 0;
  m.end = text.find(' ') == std::string::npos ? text.size() : text.find(' ');
  m.gold_cui = gold;
  p.mentions.push_back(m);
  attach_surfaces(p);
  return p;
}

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

}  // namespace

TEST(Rerank, NegativeRankScorerIsIdentity) {
  const auto in = candidates(10);
  const FnScorer scorer([](const Candidate& c) { return -static_cast<double>(c.rank); });
  const auto out = rerank(in, {}, scorer);
  EXPECT_EQ(cuis_of(out.candidates), cuis_of(in));
}

TEST(Rerank, PositiveRankScorerReverses) {
  const auto in = candidates(10);
  const FnScorer scorer([](const Candidate& c) { return static_cast<double>(c.rank); });
  auto expected = cuis_of(in);
  std::reverse(expected.begin(), expected.end());
  const auto out = rerank(in, {}, scorer);
  EXPECT_EQ(cuis_of(out.candidates), expected);
  for (std::size_t i = 0; i < out.candidates.size(); ++i) EXPECT_EQ(out.candidates[i].rank, i + 1);
}

TEST(Rerank, ExplicitScoreTable) {
  const auto in = candidates(5);
  const std::vector<std::optional<double>> scores{0.1, 0.9, 0.5, 0.9, -2.0};
  const auto out = rerank_with_scores(in, scores);
  // Hand-sorted: 0.9 (C2, first of the tie), 0.9 (C4), 0.5, 0.1, -2.
  EXPECT_EQ(cuis_of(out.candidates),
            (std::vector<std::string>{synth::cui(2), synth::cui(4), synth::cui(3), synth::cui(1), synth::cui(5)}));
  EXPECT_EQ(out.candidates[0].score, 0.9);
}

TEST(Rerank, ConstantScorerKeepsOrder) {
  const auto in = candidates(64);
  const FnScorer scorer([](const Candidate&) { return 0.25; });
  EXPECT_EQ(cuis_of(rerank(in, {}, scorer).candidates), cuis_of(in));
}

TEST(Rerank, FailedCandidatesKeepTheirPlace) {
  const auto in = candidates(5);
  const std::vector<std::optional<double>> scores{0.1, std::nullopt, 0.5, std::numeric_limits<double>::quiet_NaN(), 0.9};
  const auto out = rerank_with_scores(in, scores);
  EXPECT_EQ(cuis_of(out.candidates),
            (std::vector<std::string>{synth::cui(5), synth::cui(2), synth::cui(3), synth::cui(4), synth::cui(1)}));
  EXPECT_EQ(out.failed, (std::vector<bool>{false, true, false, true, false}));
}

TEST(Rerank, ThrowingScorerIsPerCandidate) {
  const auto in = candidates(4);
  const FnScorer scorer([](const Candidate& c) {
    if (c.rank == 1) throw std::runtime_error("boom");
    return static_cast<double>(c.rank);
  });
  const auto out = rerank(in, {}, scorer);
  EXPECT_EQ(out.candidates[0].cui, synth::cui(1));
  EXPECT_TRUE(out.failed[0]);
  EXPECT_EQ(out.candidates[1].cui, synth::cui(4));
}

TEST(Rerank, Errors) {
  const FnScorer scorer([](const Candidate&) { return 0.0; });
  EXPECT_THROW(rerank({}, {}, scorer), InvalidInput);
  const std::vector<std::optional<double>> one{1.0};
  EXPECT_THROW(rerank_with_scores(candidates(2), one), InvalidInput);
}

TEST(Rerank, PermutationAndTopSetInvariants) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = candidates(1 + rng() % 64);
    std::vector<std::optional<double>> scores;
    for (std::size_t i = 0; i < in.size(); ++i) {
      scores.push_back(rng() % 10 == 0 ? std::nullopt : std::optional<double>(std::round(u(rng) * 4) / 4));
    }
    const auto out = rerank_with_scores(in, scores);
    auto a = cuis_of(in), b = cuis_of(out.candidates);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ASSERT_EQ(a, b);
    check_candidate_list(out.candidates);
  }
}

TEST(BaselineScorer, MentionNameRanksFirst) {
  const auto kb = load_kb(synth::fixture("kb"));
  std::vector<std::string> texts;
  for (const auto& [cui, c] : kb.concepts()) {
    for (const auto& n : c.names) texts.push_back(normalize(n.surface));
  }
  auto embedder = std::make_shared<BuiltinEmbedder>(BpeTokenizer(train_bpe(count_words(texts), 200)), 64, 3);
  const auto scorer = baseline_context_scorer(embedder, ExtractionConfig::nospec);
  const RerankContext ctx{{"migräne"}, {0, 1}};
  const CandidateList in{{"C0000007", "Klinik", 0, 1}, {"C0000013", "Herz", 0, 2}, {"C0000002", "Migräne", 0, 3}};
  const auto out = rerank(in, ctx, *scorer);
  EXPECT_EQ(out.candidates[0].cui, "C0000002");
  EXPECT_NEAR(out.candidates[0].score, 1.0, 1e-9);
  EXPECT_THROW(rerank({}, ctx, *scorer), InvalidInput);
  EXPECT_THROW(baseline_context_scorer(nullptr, ExtractionConfig::all), InvalidInput);
}

TEST(RerankDataset, SmallKbGivesAllCuis) {
  KnowledgeBase kb;
  for (std::size_t i = 1; i <= 64; ++i) kb.add_name({"n" + std::to_string(i), synth::cui(i), "X", false});
  const std::vector<Post> corpus{post("p1", "n5 tut weh", synth::cui(5))};
  const auto ds = build_rerank_dataset(corpus, kb, WordTokenizer{}, {63, 150, 1.0, 1});
  ASSERT_EQ(ds.train.size(), 1u);
  std::set<std::string> all(ds.train[0].candidate_cuis.begin(), ds.train[0].candidate_cuis.end());
  EXPECT_EQ(all.size(), 64u);
  EXPECT_TRUE(all.contains(synth::cui(5)));
}

TEST(RerankDataset, LongSentenceExcluded) {
  const auto kb = synth::kb(100, 100, 72);
  const std::vector<Post> corpus{post("p1", words(151), synth::cui(1)), post("p2", words(150), synth::cui(2))};
  const auto ds = build_rerank_dataset(corpus, kb, WordTokenizer{}, {63, 150, 0.5, 1});
  EXPECT_EQ(ds.excluded_too_long, 1u);
  EXPECT_EQ(ds.train.size() + ds.validation.size(), 1u);
}

TEST(RerankDataset, InvariantsAndDeterminism) {
  const auto kb = synth::kb(200, 300, 73);
  std::vector<Post> corpus;
  for (std::size_t i = 0; i < 40; ++i) {
    corpus.push_back(post("p" + std::to_string(i), words(5 + i), synth::cui(1 + (i * 7) % 200)));
  }
  const auto a = build_rerank_dataset(corpus, kb, WordTokenizer{}, {63, 150, 0.8, 9});
  const auto b = build_rerank_dataset(corpus, kb, WordTokenizer{}, {63, 150, 0.8, 9});
  EXPECT_EQ(a.train.size(), 32u);
  EXPECT_EQ(a.validation.size(), 8u);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].example_id, b.train[i].example_id);
    EXPECT_EQ(a.train[i].candidate_cuis, b.train[i].candidate_cuis);
  }
  for (const auto* part : {&a.train, &a.validation}) {
    for (const auto& ex : *part) {
      const std::set<std::string> s(ex.candidate_cuis.begin(), ex.candidate_cuis.end());
      EXPECT_EQ(ex.candidate_cuis.size(), 64u);
      EXPECT_EQ(s.size(), 64u);
      EXPECT_EQ(std::count(ex.candidate_cuis.begin(), ex.candidate_cuis.end(), ex.gold_cui), 1);
    }
  }
  const auto c = build_rerank_dataset(corpus, kb, WordTokenizer{}, {63, 150, 0.8, 10});
  EXPECT_NE(a.train[0].candidate_cuis, c.train[0].candidate_cuis);
}

TEST(RerankDataset, RetiredConceptsAreNeverNegatives) {
  auto kb = synth::kb(70, 70, 74);
  kb.set_retired(synth::cui(3));
  const std::vector<Post> corpus{post("p1", "x y", synth::cui(1))};
  const auto ds = build_rerank_dataset(corpus, kb, WordTokenizer{}, {68, 150, 1.0, 2});
  const auto& cands = ds.train[0].candidate_cuis;
  EXPECT_EQ(std::count(cands.begin(), cands.end(), synth::cui(3)), 0);
}

TEST(RerankDataset, Errors) {
  const auto kb = synth::kb(10, 10, 75);
  const std::vector<Post> corpus{post("p1", "x", synth::cui(1))};
  EXPECT_THROW(build_rerank_dataset(corpus, kb, WordTokenizer{}, {63, 150, 0.8, 0}), DataError);
  const std::vector<Post> unknown{post("p1", "x", synth::cui(99))};
  EXPECT_THROW(build_rerank_dataset(unknown, kb, WordTokenizer{}, {5, 150, 0.8, 0}), DataError);
}

TEST(RerankFiles, RoundTrip) {
  const auto dir = synth::temp_dir("rrk");
  const std::vector<RerankExample> in{{"p1.m1", {"Mein", "Kopf"}, {1, 2}, "C0000001", {"C0000002", "C0000001"}}};
  save_rerank_examples(in, (dir / "r.jsonl").string());
  const auto out = load_rerank_examples((dir / "r.jsonl").string());
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].sentence_tokens, in[0].sentence_tokens);
  EXPECT_EQ(out[0].mention_token_span, in[0].mention_token_span);
  EXPECT_EQ(out[0].candidate_cuis, in[0].candidate_cuis);
  EXPECT_THROW(parse_rerank_example(R"({"example_id": "x", "sentence": ["a"], "mention_start_token": 0,
      "mention_end_token": 1, "gold_cui": "C1", "candidates": ["C2"]})"), DataError);
}

TEST(ScoresFile, NullMarksFailure) {
  const auto dir = synth::temp_dir("scores");
  std::ofstream((dir / "s.jsonl").string()) << R"({"example_id": "a", "scores": [0.5, null]})" << "\n";
  const auto s = load_scores((dir / "s.jsonl").string());
  ASSERT_EQ(s.at("a").size(), 2u);
  EXPECT_FALSE(s.at("a")[1].has_value());
  std::ofstream((dir / "d.jsonl").string()) << R"({"example_id": "a", "scores": []})" << "\n"
                                            << R"({"example_id": "a", "scores": []})" << "\n";
  EXPECT_THROW(load_scores((dir / "d.jsonl").string()), LoadError);
}
