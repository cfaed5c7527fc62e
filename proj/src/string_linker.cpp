#include "normkit/string_linker.hpp"

#include "normkit/errors.hpp"
#include "normkit/parallel.hpp"
#include "normkit/unicode.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace normkit {

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(unicode::decode(a), unicode::decode(b));
}

std::size_t levenshtein_bounded(std::u32string_view a, std::u32string_view b, std::size_t bound) {
  if (a.size() < b.size()) std::swap(a, b);
  if (a.size() - b.size() > bound) return bound + 1;
  thread_local std::vector<std::size_t> row;
  row.resize(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    std::size_t row_min = row[0];
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
      row_min = std::min(row_min, row[j]);
    }
    // Row minima never decrease, so the final distance is at least row_min.
    if (row_min > bound) return bound + 1;
  }
  return row[b.size()];
}

double normalized_edit_distance(std::string_view a, std::string_view b) {
  const auto ua = unicode::decode(a);
  const auto ub = unicode::decode(b);
  const std::size_t longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(ua, ub)) / static_cast<double>(longest);
}

StringIndex::StringIndex(std::vector<StringIndexEntry> entries, StringPipeline pipeline)
    : entries_(std::move(entries)), pipeline_(std::move(pipeline)) {
  std::sort(entries_.begin(), entries_.end(), [](const auto& x, const auto& y) {
    return std::tie(x.cui, x.original_name) < std::tie(y.cui, y.original_name);
  });
  entries_.erase(std::unique(entries_.begin(), entries_.end(),
                             [](const auto& x, const auto& y) {
                               return x.cui == y.cui && x.original_name == y.original_name;
                             }),
                 entries_.end());
  if (entries_.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidInput("string index too large");
  }
  terms_.reserve(entries_.size());
  groups_.reserve(entries_.size());
  std::uint32_t group = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i > 0 && entries_[i].cui != entries_[i - 1].cui) ++group;
    groups_.push_back(group);
    terms_.push_back(unicode::decode(entries_[i].normalized_term));
  }
  group_count_ = entries_.empty() ? 0 : group + 1;
}

std::string StringIndex::term_for(std::string_view surface) const {
  return normalize_and_stem(surface, pipeline_.stemmer.get());
}

CandidateList StringIndex::link(std::string_view surface, std::size_t k) const {
  if (entries_.empty()) throw InvalidInput("string index is empty");
  if (k == 0) throw InvalidInput("k must be at least 1");
  const std::u32string query = unicode::decode(term_for(surface));
  const bool by_distance = pipeline_.score == StringScore::negative_distance;

  DistinctTopK top(k);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& term = terms_[i];
    RankKey key{0.0, groups_[i], static_cast<std::uint32_t>(i)};
    if (by_distance) {
      std::size_t bound = std::numeric_limits<std::size_t>::max() - 1;
      if (top.full()) bound = static_cast<std::size_t>(top.worst().cost);
      const std::size_t d = levenshtein_bounded(query, term, bound);
      if (d > bound) continue;
      key.cost = static_cast<double>(d);
    } else {
      const std::size_t longest = std::max(query.size(), term.size());
      const double nd = longest == 0 ? 0.0
                                     : static_cast<double>(levenshtein(query, term)) /
                                           static_cast<double>(longest);
      key.cost = nd - 1.0;
    }
    top.offer(key);
  }

  CandidateList out;
  for (const auto& key : top.sorted()) {
    const auto& e = entries_[key.item];
    out.push_back({e.cui, e.original_name, -key.cost, out.size() + 1});
  }
  return out;
}

StringIndex build_string_index(const KnowledgeBase& kb, StringPipeline pipeline) {
  std::vector<StringIndexEntry> entries;
  entries.reserve(kb.name_count());
  for (const auto& [cui, c] : kb.concepts()) {
    if (c.retired) continue;
    for (const auto& n : c.names) {
      entries.push_back({normalize_and_stem(n.surface, pipeline.stemmer.get()), n.surface, cui});
    }
  }
  return StringIndex(std::move(entries), std::move(pipeline));
}

CandidateList link_string(const StringIndex& index, std::string_view surface, std::size_t k) {
  return index.link(surface, k);
}

std::vector<Prediction> link_string_batch(const StringIndex& index,
                                          std::span<const MentionQuery> queries, std::size_t k,
                                          std::size_t threads) {
  std::vector<Prediction> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    out[i] = {queries[i].mention_id, index.link(queries[i].text, k)};
  });
  return out;
}

}  // namespace normkit
