#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace normkit {

// One ranked concept for a mention. Scores are "higher is better" for every
// linker; ranks start at 1.
struct Candidate {
  std::string cui;
  std::string name;
  double score = 0.0;
  std::size_t rank = 0;
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

using CandidateList = std::vector<Candidate>;

struct Prediction {
  std::string mention_id;
  CandidateList candidates;
};

inline constexpr std::size_t kDefaultTopK = 64;

// Throws InvalidInput unless ranks are 1..n and no CUI repeats.
void check_candidate_list(const CandidateList& list);

// PRED1: JSON-lines {mention_id, candidates: [{cui, name, score, rank}]}.
std::string serialize_prediction(const Prediction& p);
Prediction parse_prediction(std::string_view json_line);
void save_predictions(const std::vector<Prediction>& predictions, const std::string& path);
std::vector<Prediction> load_predictions(const std::string& path);

// Ordering key for ranking: smaller is better. `group` and `item` are
// positions of the CUI and name in lexicographic order, so comparing keys
// breaks ties by (cost, cui, name).
struct RankKey {
  double cost = 0.0;
  std::uint32_t group = 0;
  std::uint32_t item = 0;
  friend auto operator<=>(const RankKey&, const RankKey&) = default;
};

// The k best keys with pairwise distinct groups; each group keeps its best key.
class DistinctTopK {
 public:
  explicit DistinctTopK(std::size_t k) : k_(k) {}

  bool full() const { return top_.size() >= k_; }
  // Worst retained key; only meaningful when full().
  const RankKey& worst() const { return *top_.rbegin(); }

  // Fast reject: a key that cannot enter.
  bool rejects(const RankKey& key) const { return full() && !(key < worst()); }

  void offer(const RankKey& key) {
    if (k_ == 0) return;
    if (auto it = by_group_.find(key.group); it != by_group_.end()) {
      if (key < *it->second) {
        top_.erase(it->second);
        it->second = top_.insert(key).first;
      }
      return;
    }
    if (rejects(key)) return;
    by_group_[key.group] = top_.insert(key).first;
    if (top_.size() > k_) {
      auto last = std::prev(top_.end());
      by_group_.erase(last->group);
      top_.erase(last);
    }
  }

  std::vector<RankKey> sorted() const { return {top_.begin(), top_.end()}; }

 private:
  std::size_t k_;
  std::set<RankKey> top_;
  std::unordered_map<std::uint32_t, std::set<RankKey>::iterator> by_group_;
};

}  // namespace normkit
