#pragma once

#include "normkit/text_prep.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace normkit {

inline constexpr std::string_view kLexiconSource = "LEXICON";

struct ConceptName {
  std::string surface;
  std::string cui;
  std::string source;
  bool preferred = false;
};

struct Concept {
  std::string cui;
  std::vector<ConceptName> names;  // insertion order
  std::set<std::string> semantic_types;
  bool retired = false;
};

struct LexiconEntry {
  std::string headword;
  std::vector<std::string> synonyms;
};

struct MergeReport {
  std::size_t cuis_extended = 0;
  std::size_t names_added = 0;
  std::size_t skipped_ambiguous = 0;
  std::size_t skipped_unmatched = 0;
};

struct SourceStats {
  std::string source;
  std::size_t names = 0;
  std::size_t concepts = 0;
};

struct KbStats {
  std::vector<SourceStats> per_source;  // sorted by source tag
  std::size_t total_names = 0;
  std::size_t total_concepts = 0;
};

struct KbLoadOptions {
  std::string cui_pattern = "C[0-9]{7}";
};

// Concepts, names, semantic types, hierarchy and semantic groups.
// Built by a single writer through the load_* / merge functions, then read-only.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(KbLoadOptions options = {});

  // Adds a name, creating the concept on first sight. Returns false when the
  // (cui, surface, source) triple already exists. Throws InvalidInput on an
  // invariant violation (bad CUI, blank surface, second preferred name).
  bool add_name(ConceptName name);

  void add_semantic_type(const std::string& cui, const std::string& tui);
  // Throws on dangling endpoint, self-loop or (when check_cycle) a cycle.
  void add_edge(const std::string& child, const std::string& parent, bool check_cycle = true);
  // Throws InvalidInput naming one CUI on a cycle.
  void check_acyclic() const;
  void set_group(const std::string& tui, const std::string& group);
  void set_retired(const std::string& cui, bool retired = true);

  bool contains(std::string_view cui) const;
  const Concept& at(std::string_view cui) const;  // throws InvalidInput
  const std::map<std::string, Concept, std::less<>>& concepts() const { return concepts_; }

  std::size_t name_count() const { return name_count_; }
  std::size_t duplicate_names_skipped() const { return duplicates_; }

  // CUIs with a name whose normalize() form equals `normalized`.
  const std::set<std::string>& cuis_for(std::string_view normalized) const;
  const std::map<std::string, std::set<std::string>, std::less<>>& name_index() const {
    return name_index_;
  }

  const std::set<std::pair<std::string, std::string>>& edges() const { return edges_; }
  const std::map<std::string, std::string, std::less<>>& group_map() const { return groups_; }

  // Group of a TUI, if mapped.
  std::optional<std::string> group_of(std::string_view tui) const;
  // Groups of all mapped TUIs of a concept; unmapped TUIs contribute nothing.
  std::set<std::string> groups_of_concept(std::string_view cui) const;

  // True iff a child->parent path leads from `descendant` to `ancestor`.
  // Reflexive queries return false. Throws on unknown CUIs.
  bool is_ancestor(std::string_view ancestor, std::string_view descendant) const;

  KbStats stats() const;

  bool valid_cui(std::string_view cui) const;

 private:
  KbLoadOptions options_;
  std::regex cui_regex_;
  std::map<std::string, Concept, std::less<>> concepts_;
  std::set<std::tuple<std::string, std::string, std::string>> triples_;
  std::map<std::string, std::set<std::string>, std::less<>> name_index_;
  std::set<std::pair<std::string, std::string>> edges_;  // (child, parent)
  std::map<std::string, std::set<std::string>, std::less<>> parents_;
  std::map<std::string, std::string, std::less<>> groups_;
  std::size_t name_count_ = 0;
  std::size_t duplicates_ = 0;
};

// CONC1: header "cui\tsurface\tsource\tpreferred", preferred in {0,1}.
KnowledgeBase load_concept_table(const std::string& path, KbLoadOptions options = {});
// Rows sorted by (cui, surface, source).
void save_concept_table(const KnowledgeBase& kb, const std::string& path);

// TYPE1 "cui\ttui"; unknown CUIs are reported together in one error.
void load_semantic_types(const std::string& path, KnowledgeBase& kb);
// HIER1 "child_cui\tparent_cui".
void load_hierarchy(const std::string& path, KnowledgeBase& kb);
// GRP1 "tui\tgroup".
void load_semantic_groups(const std::string& path, KnowledgeBase& kb);
// One CUI per line.
void load_retired(const std::string& path, KnowledgeBase& kb);

void save_semantic_types(const KnowledgeBase& kb, const std::string& path);
void save_hierarchy(const KnowledgeBase& kb, const std::string& path);
void save_semantic_groups(const KnowledgeBase& kb, const std::string& path);
void save_retired(const KnowledgeBase& kb, const std::string& path);

// LEX1: JSON-lines with keys headword, synonyms.
std::vector<LexiconEntry> load_lexicon(const std::string& path);

// Adds headword + synonyms (source LEXICON) to the single CUI whose names
// match the headword. Matching is against the names present before the
// merge; with a stemmer both sides are compared stemmed.
MergeReport merge_lexicon(KnowledgeBase& kb, const std::vector<LexiconEntry>& entries,
                          const Stemmer* stemmer = nullptr);

// A KB directory holds concepts.tsv plus optional types.tsv, hierarchy.tsv,
// groups.tsv and retired.txt. `path` may also name a bare CONC1 file.
KnowledgeBase load_kb(const std::string& path, KbLoadOptions options = {});
void save_kb(const KnowledgeBase& kb, const std::string& dir);

}  // namespace normkit
