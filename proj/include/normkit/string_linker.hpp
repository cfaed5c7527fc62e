#pragma once

#include "normkit/candidates.hpp"
#include "normkit/kb_store.hpp"
#include "normkit/text_prep.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace normkit {

// Unit-cost Levenshtein distance over code points.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein(std::string_view a, std::string_view b);

// Exact distance when it is <= bound, otherwise some value > bound.
std::size_t levenshtein_bounded(std::u32string_view a, std::u32string_view b, std::size_t bound);

// levenshtein / max(|a|, |b|) in code points; 0 when both are empty.
double normalized_edit_distance(std::string_view a, std::string_view b);

enum class StringScore {
  negative_distance,  // score = -distance
  similarity,         // score = 1 - normalized distance
};

struct StringPipeline {
  std::shared_ptr<const Stemmer> stemmer = std::make_shared<GermanSuffixStemmer>();
  StringScore score = StringScore::negative_distance;
};

struct StringIndexEntry {
  std::string normalized_term;
  std::string original_name;
  std::string cui;
};

// In-memory stemmed name index, one entry per distinct (cui, name), sorted
// by (cui, name). Immutable after construction.
class StringIndex {
 public:
  StringIndex(std::vector<StringIndexEntry> entries, StringPipeline pipeline);

  const std::vector<StringIndexEntry>& entries() const { return entries_; }
  const StringPipeline& pipeline() const { return pipeline_; }
  std::size_t concept_count() const { return group_count_; }

  // The query-side transformation applied to a mention surface.
  std::string term_for(std::string_view surface) const;

  // Best `k` distinct CUIs by edit distance between stemmed terms; each CUI
  // keeps its closest name. Ties break by (distance, cui, name).
  CandidateList link(std::string_view surface, std::size_t k = kDefaultTopK) const;

 private:
  std::vector<StringIndexEntry> entries_;
  std::vector<std::u32string> terms_;
  std::vector<std::uint32_t> groups_;
  std::size_t group_count_ = 0;
  StringPipeline pipeline_;
};

// Retired concepts are left out.
StringIndex build_string_index(const KnowledgeBase& kb, StringPipeline pipeline = {});

CandidateList link_string(const StringIndex& index, std::string_view surface,
                          std::size_t k = kDefaultTopK);

struct MentionQuery {
  std::string mention_id;
  std::string text;
};

// Links every query; output order follows input order regardless of threads.
std::vector<Prediction> link_string_batch(const StringIndex& index,
                                          std::span<const MentionQuery> queries,
                                          std::size_t k = kDefaultTopK, std::size_t threads = 1);

}  // namespace normkit
