#pragma once

#include "normkit/candidates.hpp"
#include "normkit/corpus.hpp"
#include "normkit/kb_store.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace normkit {

enum class ErrorCategory {
  abbreviation,
  complex_entity,
  same_synonyms,
  parent_or_child,
  wrong_semantic_type,
  wrong_semantic_group,
  unknown,
};

inline constexpr std::size_t kErrorCategoryCount = 7;

std::string_view to_string(ErrorCategory c);
ErrorCategory parse_error_category(std::string_view text);

// Two or three letters from A-Z, Ä, Ö, Ü, nothing else.
bool is_abbreviation(std::string_view surface);
// Unicode-whitespace separated words.
std::size_t word_count(std::string_view surface);

// Rule firings for one wrong top-1 prediction; `unknown` iff nothing else
// fires. Throws InvalidInput if predicted == gold or either CUI is unknown.
std::set<ErrorCategory> categorize(std::string_view surface, std::string_view predicted_cui,
                                   std::string_view gold_cui, const KnowledgeBase& kb);

struct ErrorRecord {
  std::string mention_id;
  std::string surface;
  MentionKind kind = MentionKind::technical;
  std::string predicted_cui;
  std::string gold_cui;
  std::set<ErrorCategory> categories;
  std::optional<std::string> manual_label;
};

struct ErrorReport {
  std::size_t total_errors = 0;
  std::map<ErrorCategory, std::size_t> category_counts;
  // Gold mentions whose candidate list was empty; not categorized.
  std::size_t unmatched = 0;
  struct KindSlice {
    std::size_t total = 0;
    std::size_t correct = 0;
  };
  std::map<std::string, KindSlice> per_kind;
  std::vector<ErrorRecord> records;
};

// Categorizes every wrong top-1 prediction of the gold-annotated mentions.
// Throws DataError naming the mention when one has no prediction.
ErrorReport analyze(std::span<const Post> corpus, std::span<const Prediction> predictions,
                    const KnowledgeBase& kb);

nlohmann::json to_json(const ErrorReport& report);

// mention_id, surface, kind, predicted_cui, gold_cui, categories (';'), manual_label
std::string error_records_csv(std::span<const ErrorRecord> records);

// Mean normalized edit distance between each selected mention's normalized
// surface and its top-1 name (or, when the name is blank, the closest name of
// the predicted CUI). Throws InvalidInput on an empty selection.
double edit_distance_profile(std::span<const Post> corpus, std::span<const Prediction> predictions,
                             const KnowledgeBase& kb, bool correct_only);

}  // namespace normkit
