#pragma once

#include "normkit/candidates.hpp"
#include "normkit/corpus.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace normkit {

// mention_id -> gold cui
using GoldLabels = std::map<std::string, std::string, std::less<>>;
using MentionKinds = std::map<std::string, MentionKind, std::less<>>;

// Mentions with a gold CUI.
GoldLabels gold_labels(std::span<const Post> corpus);
MentionKinds mention_kinds(std::span<const Post> corpus);

// Fraction of predictions whose gold CUI is among the first n candidates.
// Throws DataError naming the mention when a prediction has no gold entry or
// a mention is predicted twice; InvalidInput when n = 0 or nothing is given.
double accuracy_at(std::span<const Prediction> predictions, const GoldLabels& gold, std::size_t n);

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::map<std::string, std::size_t> support;
  // Gold classes never predicted; their precision is taken as 0.
  std::size_t zero_division_classes = 0;
};

// One-vs-rest per gold class, averaged with gold-support weights. A missing
// prediction counts as a miss for its gold class.
PrfResult weighted_prf(std::span<const std::string> gold,
                       std::span<const std::optional<std::string>> predicted);
// Top-1 of each prediction against its gold label.
PrfResult weighted_prf(std::span<const Prediction> predictions, const GoldLabels& gold);

// 2x2 agreement table of two annotators.
double cohens_kappa(const std::array<std::array<double, 2>, 2>& confusion);

inline constexpr std::array<std::size_t, 5> kReportCutoffs{1, 5, 10, 32, 64};

struct MetricsReport {
  std::map<std::size_t, double> accuracy_at;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_mentions = 0;
  std::map<std::string, std::size_t> support;
  std::size_t zero_division_classes = 0;
  // "lay" / "technical" -> (n_mentions, accuracy_at)
  struct KindSlice {
    std::size_t n_mentions = 0;
    std::map<std::size_t, double> accuracy_at;
  };
  std::map<std::string, KindSlice> per_kind;
};

// Every gold mention must have exactly one prediction and vice versa;
// violations raise DataError naming the mention.
MetricsReport evaluate(std::span<const Prediction> predictions, const GoldLabels& gold,
                       const MentionKinds* kinds = nullptr,
                       std::span<const std::size_t> cutoffs = kReportCutoffs);

nlohmann::json to_json(const MetricsReport& report);

}  // namespace normkit
