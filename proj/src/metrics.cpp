#include "normkit/metrics.hpp"

#include "normkit/errors.hpp"

#include <set>

namespace normkit {

using nlohmann::json;

GoldLabels gold_labels(std::span<const Post> corpus) {
  GoldLabels gold;
  for (const auto& post : corpus) {
    for (const auto& m : post.mentions) {
      if (!m.gold_cui) continue;
      if (!gold.emplace(m.id, *m.gold_cui).second) {
        throw DataError("mention id '" + m.id + "' occurs twice in the corpus");
      }
    }
  }
  return gold;
}

MentionKinds mention_kinds(std::span<const Post> corpus) {
  MentionKinds kinds;
  for (const auto& post : corpus) {
    for (const auto& m : post.mentions) kinds.emplace(m.id, m.kind);
  }
  return kinds;
}

namespace {

// Gold CUI per prediction, checking ids.
std::vector<const std::string*> match_gold(std::span<const Prediction> predictions,
                                           const GoldLabels& gold) {
  std::vector<const std::string*> out;
  out.reserve(predictions.size());
  std::set<std::string_view> seen;
  for (const auto& p : predictions) {
    const auto it = gold.find(p.mention_id);
    if (it == gold.end()) throw DataError("prediction for mention '" + p.mention_id + "' has no gold CUI");
    if (!seen.insert(p.mention_id).second) {
      throw DataError("mention '" + p.mention_id + "' is predicted twice");
    }
    out.push_back(&it->second);
  }
  return out;
}

bool hit_within(const Prediction& p, const std::string& gold, std::size_t n) {
  const std::size_t limit = std::min(n, p.candidates.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (p.candidates[i].cui == gold) return true;
  }
  return false;
}

}  // namespace

double accuracy_at(std::span<const Prediction> predictions, const GoldLabels& gold, std::size_t n) {
  if (n == 0) throw InvalidInput("accuracy_at needs n >= 1");
  if (predictions.empty()) throw InvalidInput("accuracy_at of an empty prediction set");
  const auto golds = match_gold(predictions, gold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (hit_within(predictions[i], *golds[i], n)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

PrfResult weighted_prf(std::span<const std::string> gold,
                       std::span<const std::optional<std::string>> predicted) {
  if (gold.size() != predicted.size()) throw InvalidInput("gold and prediction counts differ");
  if (gold.empty()) throw InvalidInput("weighted_prf of an empty set");
  std::map<std::string, std::size_t> tp, predicted_count;
  PrfResult r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++r.support[gold[i]];
    if (predicted[i]) {
      ++predicted_count[*predicted[i]];
      if (*predicted[i] == gold[i]) ++tp[gold[i]];
    }
  }
  const double total = static_cast<double>(gold.size());
  for (const auto& [cls, support] : r.support) {
    const double t = static_cast<double>(tp[cls]);
    const auto pc = predicted_count.find(cls);
    double precision = 0.0;
    if (pc == predicted_count.end()) {
      ++r.zero_division_classes;
    } else {
      precision = t / static_cast<double>(pc->second);
    }
    const double recall = t / static_cast<double>(support);
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    const double w = static_cast<double>(support) / total;
    r.precision += w * precision;
    r.recall += w * recall;
    r.f1 += w * f1;
  }
  return r;
}

PrfResult weighted_prf(std::span<const Prediction> predictions, const GoldLabels& gold) {
  const auto golds = match_gold(predictions, gold);
  std::vector<std::string> g;
  std::vector<std::optional<std::string>> p;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    g.push_back(*golds[i]);
    if (predictions[i].candidates.empty()) {
      p.emplace_back(std::nullopt);
    } else {
      p.emplace_back(predictions[i].candidates.front().cui);
    }
  }
  return weighted_prf(g, p);
}

double cohens_kappa(const std::array<std::array<double, 2>, 2>& c) {
  double total = 0.0;
  for (const auto& row : c) {
    for (double v : row) {
      if (!(v >= 0.0)) throw InvalidInput("confusion counts must be non-negative");
      total += v;
    }
  }
  if (!(total > 0.0)) throw InvalidInput("confusion matrix is empty");
  const double p_o = (c[0][0] + c[1][1]) / total;
  const double row0 = (c[0][0] + c[0][1]) / total;
  const double col0 = (c[0][0] + c[1][0]) / total;
  const double p_e = row0 * col0 + (1.0 - row0) * (1.0 - col0);
  if (p_e >= 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

MetricsReport evaluate(std::span<const Prediction> predictions, const GoldLabels& gold,
                       const MentionKinds* kinds, std::span<const std::size_t> cutoffs) {
  match_gold(predictions, gold);
  if (predictions.size() != gold.size()) {
    std::set<std::string_view> predicted;
    for (const auto& p : predictions) predicted.insert(p.mention_id);
    for (const auto& [id, cui] : gold) {
      if (!predicted.contains(id)) throw DataError("mention '" + id + "' has no prediction");
    }
  }
  MetricsReport r;
  r.n_mentions = predictions.size();
  for (auto n : cutoffs) r.accuracy_at[n] = accuracy_at(predictions, gold, n);
  auto prf = weighted_prf(predictions, gold);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.f1 = prf.f1;
  r.support = std::move(prf.support);
  r.zero_division_classes = prf.zero_division_classes;
  if (kinds != nullptr) {
    std::map<std::string, std::vector<Prediction>> slices;
    for (const auto& p : predictions) {
      const auto it = kinds->find(p.mention_id);
      if (it == kinds->end()) throw DataError("mention '" + p.mention_id + "' has no kind");
      slices[std::string(to_string(it->second))].push_back(p);
    }
    for (const auto& [kind, preds] : slices) {
      auto& slice = r.per_kind[kind];
      slice.n_mentions = preds.size();
      for (auto n : cutoffs) slice.accuracy_at[n] = accuracy_at(preds, gold, n);
    }
  }
  return r;
}

json to_json(const MetricsReport& r) {
  auto acc = [](const std::map<std::size_t, double>& m) {
    json j = json::object();
    for (const auto& [n, v] : m) j[std::to_string(n)] = v;
    return j;
  };
  json j{{"accuracy_at", acc(r.accuracy_at)},
         {"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"n_mentions", r.n_mentions},
         {"zero_division_classes", r.zero_division_classes}};
  if (!r.per_kind.empty()) {
    json kinds = json::object();
    for (const auto& [kind, slice] : r.per_kind) {
      kinds[kind] = {{"n_mentions", slice.n_mentions}, {"accuracy_at", acc(slice.accuracy_at)}};
    }
    j["per_kind"] = std::move(kinds);
  }
  return j;
}

}  // namespace normkit
