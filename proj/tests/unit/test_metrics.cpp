#include "normkit/errors.hpp"
#include "normkit/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "synthetic.hpp"

using namespace normkit;

namespace {

Prediction pred(const std::string& id, std::vector<std::string> cuis) {
  Prediction p{id, {}};
  for (std::size_t i = 0; i < cuis.size(); ++i) p.candidates.push_back({cuis[i], "n", -static_cast<double>(i), i + 1});
  return p;
}

}  // namespace

TEST(AccuracyAt, AllRankOneCorrect) {
  const GoldLabels gold{{"a", "C1"}, {"b", "C2"}};
  const std::vector<Prediction> p{pred("a", {"C1", "C2"}), pred("b", {"C2", "C1"})};
  EXPECT_EQ(accuracy_at(p, gold, 1), 1.0);
}

TEST(AccuracyAt, GoldAtRankThree) {
  const GoldLabels gold{{"a", "C1"}, {"b", "C2"}};
  const std::vector<Prediction> p{pred("a", {"C7", "C8", "C1"}), pred("b", {"C7", "C8", "C2"})};
  EXPECT_EQ(accuracy_at(p, gold, 2), 0.0);
  EXPECT_EQ(accuracy_at(p, gold, 3), 1.0);
}

TEST(AccuracyAt, TenMentionHandCount) {
  GoldLabels gold;
  std::vector<Prediction> p;
  // Gold ranks: 1,1,2,3,5,none,1,4,2,none.
  const std::vector<int> ranks{1, 1, 2, 3, 5, 0, 1, 4, 2, 0};
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    const std::string id = "m" + std::to_string(i);
    gold[id] = "G";
    std::vector<std::string> cuis{"X1", "X2", "X3", "X4", "X5"};
    if (ranks[i] > 0) cuis[static_cast<std::size_t>(ranks[i] - 1)] = "G";
    p.push_back(pred(id, cuis));
  }
  EXPECT_DOUBLE_EQ(accuracy_at(p, gold, 1), 0.3);
  EXPECT_DOUBLE_EQ(accuracy_at(p, gold, 2), 0.5);
  EXPECT_DOUBLE_EQ(accuracy_at(p, gold, 3), 0.6);
  EXPECT_DOUBLE_EQ(accuracy_at(p, gold, 5), 0.8);
  EXPECT_DOUBLE_EQ(accuracy_at(p, gold, 64), 0.8);
}

TEST(AccuracyAt, Errors) {
  const GoldLabels gold{{"a", "C1"}};
  EXPECT_THROW(accuracy_at(std::vector<Prediction>{pred("zz", {"C1"})}, gold, 1), DataError);
  EXPECT_THROW(accuracy_at(std::vector<Prediction>{pred("a", {"C1"}), pred("a", {"C1"})}, gold, 1), DataError);
  EXPECT_THROW(accuracy_at(std::vector<Prediction>{pred("a", {"C1"})}, gold, 0), InvalidInput);
}

TEST(AccuracyAt, MonotoneAndTopOneEqualsRecall) {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 50; ++trial) {
    GoldLabels gold;
    std::vector<Prediction> p;
    for (int i = 0; i < 40; ++i) {
      const std::string id = "m" + std::to_string(i);
      gold[id] = synth::cui(1 + rng() % 8);
      std::vector<std::string> cuis;
      for (std::size_t c = 1; c <= 8; ++c) cuis.push_back(synth::cui(c));
      std::shuffle(cuis.begin(), cuis.end(), rng);
      cuis.resize(1 + rng() % 8);
      p.push_back(pred(id, cuis));
    }
    double last = 0.0;
    for (std::size_t n = 1; n <= 10; ++n) {
      const double a = accuracy_at(p, gold, n);
      EXPECT_GE(a, last);
      last = a;
    }
    const auto prf = weighted_prf(p, gold);
    EXPECT_NEAR(prf.recall, accuracy_at(p, gold, 1), 1e-12);
  }
}

TEST(WeightedPrf, SingleClassPerfect) {
  const std::vector<std::string> gold{"A", "A"};
  const std::vector<std::optional<std::string>> predicted{"A", "A"};
  const auto r = weighted_prf(gold, predicted);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(WeightedPrf, HalfPerfectTwoClasses) {
  const std::vector<std::string> gold{"A", "A", "B", "B"};
  const std::vector<std::optional<std::string>> predicted{"A", "A", "C", "C"};
  const auto r = weighted_prf(gold, predicted);
  EXPECT_EQ(r.f1, 0.5);
  EXPECT_EQ(r.zero_division_classes, 1u);
}

TEST(WeightedPrf, ThreeClassFixtureMatchesConfusionTallies) {
  const std::vector<std::string> gold{"A", "A", "A", "B", "B", "C", "C", "C", "C", "A"};
  const std::vector<std::optional<std::string>> predicted{"A", "B", "A", "B", "C", "C", "A", std::nullopt, "C", "A"};
  const auto got = weighted_prf(gold, predicted);
  const auto want = oracle::weighted_prf(gold, predicted);
  EXPECT_NEAR(got.precision, want.precision, 1e-12);
  EXPECT_NEAR(got.recall, want.recall, 1e-12);
  EXPECT_NEAR(got.f1, want.f1, 1e-12);
  EXPECT_EQ(got.support.at("A"), 4u);
}

TEST(WeightedPrf, RandomAgainstOracle) {
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> gold;
    std::vector<std::optional<std::string>> predicted;
    for (std::size_t i = 1 + rng() % 30; i > 0; --i) {
      gold.push_back(std::string(1, static_cast<char>('A' + rng() % 5)));
      if (rng() % 7 == 0) {
        predicted.emplace_back(std::nullopt);
      } else {
        predicted.emplace_back(std::string(1, static_cast<char>('A' + rng() % 6)));
      }
    }
    const auto got = weighted_prf(gold, predicted);
    const auto want = oracle::weighted_prf(gold, predicted);
    ASSERT_NEAR(got.precision, want.precision, 1e-12);
    ASSERT_NEAR(got.recall, want.recall, 1e-12);
    ASSERT_NEAR(got.f1, want.f1, 1e-12);
    for (double v : {got.precision, got.recall, got.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Kappa, Fixtures) {
  EXPECT_EQ(cohens_kappa({{{10, 0}, {0, 10}}}), 1.0);
  EXPECT_EQ(cohens_kappa({{{25, 25}, {25, 25}}}), 0.0);
  // p_o = 0.85, p_e = 0.5 * 0.45 + 0.5 * 0.55 = 0.5.
  EXPECT_NEAR(cohens_kappa({{{40, 10}, {5, 45}}}), 0.7, 1e-12);
  EXPECT_EQ(cohens_kappa({{{10, 0}, {0, 0}}}), 1.0);
  EXPECT_THROW(cohens_kappa({{{0, 0}, {0, 0}}}), InvalidInput);
}

TEST(Evaluate, ReportAndJson) {
  const auto corpus = load_corpus(synth::fixture("corpus.jsonl"));
  const auto gold = gold_labels(corpus);
  const auto kinds = mention_kinds(corpus);
  std::vector<Prediction> p;
  for (const auto& [id, cui] : gold) p.push_back(pred(id, {id == "p3.m2" ? "C0000010" : cui, "C0000013"}));
  const auto report = evaluate(p, gold, &kinds);
  EXPECT_EQ(report.n_mentions, 10u);
  EXPECT_DOUBLE_EQ(report.accuracy_at.at(1), 0.9);
  EXPECT_DOUBLE_EQ(report.per_kind.at("lay").accuracy_at.at(1), 0.75);
  EXPECT_EQ(report.per_kind.at("technical").n_mentions, 6u);
  std::size_t support = 0;
  for (const auto& [cui, n] : report.support) support += n;
  EXPECT_EQ(support, report.n_mentions);
  const auto j = to_json(report);
  EXPECT_DOUBLE_EQ(j.at("accuracy_at").at("64").get<double>(), 0.9);
  EXPECT_EQ(j.at("n_mentions").get<std::size_t>(), 10u);
}

TEST(Evaluate, MissingPredictionNamesMention) {
  const GoldLabels gold{{"a", "C1"}, {"b", "C2"}};
  try {
    evaluate(std::vector<Prediction>{pred("a", {"C1"})}, gold);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
  }
}
