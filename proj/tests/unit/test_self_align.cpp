#include "normkit/errors.hpp"
#include "normkit/self_align.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "synthetic.hpp"

using namespace normkit;

namespace {

Batch random_batch(std::mt19937_64& rng, std::size_t m, std::size_t d, std::size_t labels) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Batch b;
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(d));
    for (auto& v : x) v = normal(rng);
    b.push_back({x, synth::cui(1 + i % labels)});
  }
  return b;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd W(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (auto& v : W.reshaped()) v = normal(rng);
  return W;
}

// Central differences carry ~1e-11 of rounding noise, which would read as a
// 100% error where the true gradient vanishes (d_out = 1). Below 1e-9 both
// sides count as zero.
double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double diff = (a - b).norm();
  if (diff < 1e-9) return 0.0;
  return diff / std::max(a.norm(), b.norm());
}

}  // namespace

TEST(SimilarityMatrix, SingleItem) {
  Batch b{{Eigen::Vector3d(1, 2, 3), "C1"}};
  const auto S = similarity_matrix(b, ProjectionModel::identity(3));
  ASSERT_EQ(S.rows(), 1);
  EXPECT_EQ(S(0, 0), 1.0);
}

TEST(SimilarityMatrix, OrthogonalInputs) {
  Batch b{{Eigen::Vector3d(1, 0, 0), "A"}, {Eigen::Vector3d(0, 2, 0), "B"}, {Eigen::Vector3d(0, 0, 3), "C"}};
  const auto S = similarity_matrix(b, ProjectionModel::identity(3));
  EXPECT_TRUE(S.isApprox(Eigen::Matrix3d::Identity()));
}

TEST(SimilarityMatrix, MatchesPerPairCosine) {
  std::mt19937_64 rng(51);
  const auto b = random_batch(rng, 4, 5, 2);
  ProjectionModel model{random_matrix(rng, 3, 5)};
  const auto S = similarity_matrix(b, model);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const Eigen::VectorXd zi = model.W * b[i].x, zj = model.W * b[j].x;
      EXPECT_NEAR(S(i, j), zi.dot(zj) / (zi.norm() * zj.norm()), 1e-12);
      EXPECT_EQ(S(i, j), S(j, i));
    }
  }
}

TEST(SimilarityMatrix, ZeroProjection) {
  Batch b{{Eigen::Vector2d(1, 0), "A"}, {Eigen::Vector2d(0, 1), "B"}};
  ProjectionModel model{Eigen::MatrixXd::Zero(2, 2)};
  EXPECT_THROW(similarity_matrix(b, model), InvalidInput);
}

TEST(Mining, LargeLambdaTakesEveryValidTriplet) {
  std::mt19937_64 rng(52);
  const auto b = random_batch(rng, 6, 3, 2);
  const auto pairs = mine_hard_pairs(b, ProjectionModel::identity(3), {1e9});
  // Three items per label: each anchor has two positives and three negatives.
  EXPECT_EQ(pairs.positives.size(), 12u);
  EXPECT_EQ(pairs.negatives.size(), 18u);
}

TEST(Mining, ZeroLambdaRejectsFarPositive) {
  Batch b{{Eigen::Vector2d(0, 0), "A"}, {Eigen::Vector2d(10, 0), "A"}, {Eigen::Vector2d(1, 0), "B"}};
  const auto pairs = mine_hard_pairs(b, ProjectionModel::identity(2), {0.0});
  // Anchor 0: d_ap = 100 > d_an = 1. Anchor 1: d_ap = 100 > d_an = 81.
  EXPECT_TRUE(pairs.positives.empty());
  EXPECT_TRUE(pairs.negatives.empty());
}

TEST(Mining, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng() % 11, d = 1 + rng() % 6, labels = 1 + rng() % 4;
    const auto b = random_batch(rng, m, d, labels);
    const Eigen::MatrixXd W = random_matrix(rng, 1 + rng() % 4, d);
    const double lambda = std::vector<double>{0.0, 0.2, 0.5, 10.0}[rng() % 4];
    const auto got = mine_hard_pairs(b, ProjectionModel{W}, {lambda});
    const auto want = oracle::mine(b, W, lambda);
    ASSERT_EQ(got.positives, want.positives);
    ASSERT_EQ(got.negatives, want.negatives);
  }
}

TEST(Mining, ProsePredicateIsInjectable) {
  Batch b{{Eigen::Vector2d(0, 0), "A"}, {Eigen::Vector2d(10, 0), "A"}, {Eigen::Vector2d(1, 0), "B"}};
  const auto pairs = mine_hard_pairs(b, ProjectionModel::identity(2), {0.0}, closer_negative_predicate);
  EXPECT_EQ(pairs.positives, (std::set<IndexPair>{{0, 1}, {1, 0}}));
  EXPECT_EQ(pairs.negatives, (std::set<IndexPair>{{0, 2}, {1, 2}}));
}

TEST(MsLoss, EmptySetsAreZero) {
  EXPECT_EQ(ms_loss(Eigen::MatrixXd::Identity(3, 3), {}, {}), 0.0);
}

TEST(MsLoss, PositiveAtEpsilon) {
  Eigen::MatrixXd S(1, 1);
  S << 0.5;
  MinedPairs pairs;
  pairs.positives.insert({0, 0});
  EXPECT_NEAR(ms_loss(S, pairs, {}), std::log(2.0) / 50.0, 1e-15);
}

TEST(MsLoss, MatchesTermByTermOracle) {
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd S(5, 5);
    for (auto& v : S.reshaped()) v = u(rng);
    MinedPairs pairs;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        if (rng() % 3 == 0) pairs.positives.insert({i, j});
        if (rng() % 3 == 0) pairs.negatives.insert({i, j});
      }
    }
    const double got = ms_loss(S, pairs, {});
    const double want = oracle::ms_loss(S, pairs, 2.0, 50.0, 0.5);
    EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, std::abs(want)));
    EXPECT_GE(got, 0.0);
    EXPECT_EQ(got > 0.0, !pairs.positives.empty() || !pairs.negatives.empty());
  }
}

TEST(MsLoss, StableForExtremeExponents) {
  Eigen::MatrixXd S(2, 2);
  S << 1, -1, -1, 1;
  MinedPairs pairs;
  pairs.positives.insert({0, 1});
  pairs.negatives.insert({1, 0});
  const double l = ms_loss(S, pairs, {2000.0, 5000.0, 0.5});
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 1.5 / 2.0, 1e-3);
}

TEST(MsLossGradient, EmptySetsGiveZero) {
  std::mt19937_64 rng(55);
  const auto b = random_batch(rng, 5, 4, 2);
  const auto g = ms_loss_gradient(b, ProjectionModel{random_matrix(rng, 3, 4)}, {}, {});
  EXPECT_EQ(g.norm(), 0.0);
}

TEST(MsLossGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d_in = 2 + rng() % 7, d_out = 1 + rng() % 4, m = 2 + rng() % 9;
    const auto b = random_batch(rng, m, d_in, 1 + rng() % 3);
    const Eigen::MatrixXd W = random_matrix(rng, d_out, d_in);
    auto pairs = oracle::mine(b, W, 10.0);
    if (pairs.positives.empty()) pairs.positives.insert({0, 1});
    if (pairs.negatives.empty()) pairs.negatives.insert({1, 0});
    const MSLossParams params{2.0, 5.0, 0.5};
    const auto analytic = ms_loss_gradient(b, ProjectionModel{W}, pairs, params);
    const auto numeric = oracle::ms_loss_fd_gradient(b, W, pairs, params, 1e-5);
    EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(MsLossGradient, SmallStepDecreasesLoss) {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = random_batch(rng, 8, 6, 3);
    ProjectionModel model{random_matrix(rng, 4, 6)};
    const auto pairs = mine_hard_pairs(b, model, {10.0});
    const double before = ms_loss(similarity_matrix(b, model), pairs, {});
    model.W -= 1e-4 * ms_loss_gradient(b, model, pairs, {});
    EXPECT_LT(ms_loss(similarity_matrix(b, model), pairs, {}), before);
  }
}

TEST(TripletLoss, Examples) {
  const Eigen::Vector2d a(0, 0), far(3, 0), p(1, 0);
  EXPECT_EQ(triplet_loss(a, a, far, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(triplet_loss(a, p, a, 0.5), 1.5);
  std::mt19937_64 rng(58);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Eigen::Vector3d x, y, z;
    for (auto* v : {&x, &y, &z}) {
      for (auto& c : *v) c = normal(rng);
    }
    const double direct = (x - y).squaredNorm() - (x - z).squaredNorm() + 1.0;
    EXPECT_NEAR(triplet_loss(x, y, z, 1.0), std::max(direct, 0.0), 1e-12);
    EXPECT_NEAR(triplet_term(x, y, z, 1.0), direct, 1e-12);
    EXPECT_NEAR(triplet_term(x, z, y, -1.0), -direct, 1e-12);
  }
}

TEST(Train, ZeroRateLeavesModelUnchanged) {
  std::mt19937_64 rng(59);
  const std::vector<Batch> batches{random_batch(rng, 6, 4, 2)};
  const auto start = ProjectionModel::identity(4);
  TrainConfig cfg;
  cfg.rate = 0.0;
  cfg.epochs = 5;
  const auto result = train(batches, start, cfg);
  EXPECT_EQ(result.model.W, start.W);
  ASSERT_EQ(result.loss_trace.size(), 5u);
  for (double l : result.loss_trace) EXPECT_EQ(l, result.loss_trace.front());
}

TEST(Train, OneEpochIsOneStep) {
  std::mt19937_64 rng(60);
  const std::vector<Batch> batches{random_batch(rng, 8, 5, 2)};
  const ProjectionModel start{random_matrix(rng, 3, 5)};
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.rate = 0.05;
  const auto result = train(batches, start, cfg);
  const auto pairs = mine_hard_pairs(batches[0], start, cfg.mining);
  const Eigen::MatrixXd expected = start.W - cfg.rate * ms_loss_gradient(batches[0], start, pairs, cfg.loss);
  EXPECT_TRUE(result.model.W.isApprox(expected, 1e-14));
  EXPECT_NEAR(result.loss_trace[0], ms_loss(similarity_matrix(batches[0], start), pairs, cfg.loss), 1e-15);
}

TEST(Train, PullsLabelsApart) {
  const auto batch = synth::noisy_copies(2, 5, 8, 0.8, 61);
  const auto start = ProjectionModel::random(8, 8, 0.3, 62);
  TrainConfig cfg;
  cfg.rate = 0.5;
  const auto result = train({batch}, start, cfg);
  const auto [intra0, inter0] = label_cosine_means(batch, start);
  const auto [intra1, inter1] = label_cosine_means(batch, result.model);
  EXPECT_GT(intra1, intra0);
  EXPECT_LT(inter1, inter0);
}

TEST(Train, Deterministic) {
  const auto batch = synth::noisy_copies(3, 4, 6, 0.5, 63);
  TrainConfig cfg;
  cfg.epochs = 10;
  const auto a = train({batch}, ProjectionModel::identity(6), cfg);
  const auto b = train({batch}, ProjectionModel::identity(6), cfg);
  EXPECT_EQ(a.model.W, b.model.W);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
}

TEST(Train, DivergenceIsReported) {
  const auto batch = synth::noisy_copies(2, 3, 4, 0.5, 64);
  TrainConfig cfg;
  cfg.rate = 1e300;
  cfg.epochs = 20;
  EXPECT_THROW(train({batch}, ProjectionModel::identity(4), cfg), DataError);
}

TEST(TrainConfigFile, ParsesAndRejectsUnknownKeys) {
  const auto cfg = parse_train_config(R"({"alpha": 3, "lambda": 0.1, "epochs": 7, "seed": 9})");
  EXPECT_EQ(cfg.loss.alpha, 3.0);
  EXPECT_EQ(cfg.loss.beta, 50.0);
  EXPECT_EQ(cfg.mining.lambda, 0.1);
  EXPECT_EQ(cfg.epochs, 7u);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_THROW(parse_train_config(R"({"gamma": 1})"), DataError);
  EXPECT_THROW(parse_train_config(R"({"alpha": -1})"), DataError);
  EXPECT_THROW(parse_train_config("not json"), DataError);
}

TEST(ProjectionFiles, RoundTrip) {
  const auto dir = synth::temp_dir("proj");
  const auto model = ProjectionModel::random(3, 5, 0.2, 65);
  save_projection(model, (dir / "p.json").string());
  EXPECT_EQ(load_projection((dir / "p.json").string()).W, model.W);
  save_loss_trace({0.5, 0.25}, (dir / "l.csv").string());
  std::ifstream in((dir / "l.csv").string());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "epoch,loss");
  EXPECT_EQ(first.substr(0, 2), "1,");
}
