#include "normkit/error_analysis.hpp"

#include "normkit/errors.hpp"
#include "normkit/string_linker.hpp"
#include "normkit/text_prep.hpp"
#include "normkit/unicode.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace normkit {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kErrorCategoryCount> kCategoryNames{
    "abbreviation",        "complex_entity",       "same_synonyms", "parent_or_child",
    "wrong_semantic_type", "wrong_semantic_group", "unknown"};

template <typename Set>
bool disjoint(const Set& a, const Set& b) {
  for (const auto& x : a) {
    if (b.contains(x)) return false;
  }
  return true;
}

std::set<std::string> normalized_names(const Concept& c) {
  std::set<std::string> out;
  for (const auto& n : c.names) out.insert(normalize(n.surface));
  return out;
}

}  // namespace

std::string_view to_string(ErrorCategory c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

ErrorCategory parse_error_category(std::string_view text) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == text) return static_cast<ErrorCategory>(i);
  }
  throw InvalidInput("unknown error category '" + std::string(text) + "'");
}

bool is_abbreviation(std::string_view surface) {
  const std::u32string cps = unicode::decode(unicode::nfc(surface));
  if (cps.size() < 2 || cps.size() > 3) return false;
  return std::all_of(cps.begin(), cps.end(), [](char32_t c) {
    return (c >= U'A' && c <= U'Z') || c == U'Ä' || c == U'Ö' || c == U'Ü';
  });
}

std::size_t word_count(std::string_view surface) { return unicode::split_whitespace(surface).size(); }

std::set<ErrorCategory> categorize(std::string_view surface, std::string_view predicted_cui,
                                   std::string_view gold_cui, const KnowledgeBase& kb) {
  if (predicted_cui == gold_cui) {
    throw InvalidInput("prediction " + std::string(predicted_cui) + " equals the gold CUI");
  }
  if (!kb.contains(predicted_cui)) {
    throw InvalidInput("predicted CUI " + std::string(predicted_cui) + " is not in the kb");
  }
  if (!kb.contains(gold_cui)) {
    throw InvalidInput("gold CUI " + std::string(gold_cui) + " is not in the kb");
  }
  const Concept& predicted = kb.at(predicted_cui);
  const Concept& gold = kb.at(gold_cui);
  std::set<ErrorCategory> out;
  if (is_abbreviation(surface)) out.insert(ErrorCategory::abbreviation);
  if (word_count(surface) >= 3) out.insert(ErrorCategory::complex_entity);
  if (!disjoint(normalized_names(predicted), normalized_names(gold))) {
    out.insert(ErrorCategory::same_synonyms);
  }
  if (kb.is_ancestor(predicted_cui, gold_cui) || kb.is_ancestor(gold_cui, predicted_cui)) {
    out.insert(ErrorCategory::parent_or_child);
  }
  if (disjoint(predicted.semantic_types, gold.semantic_types)) {
    out.insert(ErrorCategory::wrong_semantic_type);
  }
  if (disjoint(kb.groups_of_concept(predicted_cui), kb.groups_of_concept(gold_cui))) {
    out.insert(ErrorCategory::wrong_semantic_group);
  }
  if (out.empty()) out.insert(ErrorCategory::unknown);
  return out;
}

namespace {

struct Evaluated {
  const Mention* mention;
  const Prediction* prediction;
};

std::vector<Evaluated> pair_up(std::span<const Post> corpus,
                               std::span<const Prediction> predictions) {
  std::map<std::string_view, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.mention_id, &p).second) {
      throw DataError("mention '" + p.mention_id + "' is predicted twice");
    }
  }
  std::vector<Evaluated> out;
  for (const auto& post : corpus) {
    for (const auto& m : post.mentions) {
      if (!m.gold_cui) continue;
      const auto it = by_id.find(m.id);
      if (it == by_id.end()) throw DataError("mention '" + m.id + "' has no prediction");
      out.push_back({&m, it->second});
    }
  }
  return out;
}

}  // namespace

ErrorReport analyze(std::span<const Post> corpus, std::span<const Prediction> predictions,
                    const KnowledgeBase& kb) {
  ErrorReport report;
  for (std::size_t i = 0; i < kErrorCategoryCount; ++i) {
    report.category_counts[static_cast<ErrorCategory>(i)] = 0;
  }
  for (const auto& [m, p] : pair_up(corpus, predictions)) {
    auto& slice = report.per_kind[std::string(to_string(m->kind))];
    ++slice.total;
    if (p->candidates.empty()) {
      ++report.unmatched;
      continue;
    }
    const std::string& top = p->candidates.front().cui;
    if (top == *m->gold_cui) {
      ++slice.correct;
      continue;
    }
    ErrorRecord rec{m->id, m->surface, m->kind, top, *m->gold_cui,
                    categorize(m->surface, top, *m->gold_cui, kb), std::nullopt};
    for (auto c : rec.categories) ++report.category_counts[c];
    ++report.total_errors;
    report.records.push_back(std::move(rec));
  }
  return report;
}

json to_json(const ErrorReport& report) {
  json counts = json::object();
  for (const auto& [c, n] : report.category_counts) counts[std::string(to_string(c))] = n;
  json kinds = json::object();
  for (const auto& [kind, s] : report.per_kind) {
    kinds[kind] = {{"total", s.total},
                   {"correct", s.correct},
                   {"accuracy", s.total ? static_cast<double>(s.correct) / static_cast<double>(s.total)
                                        : 0.0}};
  }
  return {{"total_errors", report.total_errors},
          {"category_counts", std::move(counts)},
          {"unmatched", report.unmatched},
          {"per_kind", std::move(kinds)}};
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string error_records_csv(std::span<const ErrorRecord> records) {
  std::string out = "mention_id,surface,kind,predicted_cui,gold_cui,categories,manual_label\n";
  for (const auto& r : records) {
    std::string cats;
    for (auto c : r.categories) {
      if (!cats.empty()) cats += ';';
      cats += to_string(c);
    }
    out += csv_field(r.mention_id) + ',' + csv_field(r.surface) + ',' +
           std::string(to_string(r.kind)) + ',' + csv_field(r.predicted_cui) + ',' +
           csv_field(r.gold_cui) + ',' + cats + ',' + csv_field(r.manual_label.value_or("")) +
           '\n';
  }
  return out;
}

double edit_distance_profile(std::span<const Post> corpus, std::span<const Prediction> predictions,
                             const KnowledgeBase& kb, bool correct_only) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [m, p] : pair_up(corpus, predictions)) {
    if (p->candidates.empty()) continue;
    const Candidate& top = p->candidates.front();
    if (correct_only && top.cui != *m->gold_cui) continue;
    const std::string surface = normalize(m->surface);
    double d = 0.0;
    if (!unicode::trim(top.name).empty()) {
      d = normalized_edit_distance(surface, normalize(top.name));
    } else {
      d = std::numeric_limits<double>::infinity();
      for (const auto& n : kb.at(top.cui).names) {
        d = std::min(d, normalized_edit_distance(surface, normalize(n.surface)));
      }
    }
    sum += d;
    ++count;
  }
  if (count == 0) throw InvalidInput("edit-distance profile over an empty selection");
  return sum / static_cast<double>(count);
}

}  // namespace normkit
