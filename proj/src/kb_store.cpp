#include "normkit/kb_store.hpp"

#include "normkit/errors.hpp"
#include "normkit/io_util.hpp"
#include "normkit/unicode.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <filesystem>
#include <sstream>

namespace normkit {

namespace {

const std::set<std::string> kEmptySet;

const std::regex kTuiRegex("T[0-9]{3}");

}  // namespace

KnowledgeBase::KnowledgeBase(KbLoadOptions options)
    : options_(std::move(options)), cui_regex_(options_.cui_pattern) {}

bool KnowledgeBase::valid_cui(std::string_view cui) const {
  return std::regex_match(cui.begin(), cui.end(), cui_regex_);
}

bool KnowledgeBase::add_name(ConceptName name) {
  if (!valid_cui(name.cui)) {
    throw InvalidInput("invalid CUI '" + name.cui + "'");
  }
  if (unicode::trim(name.surface).empty()) {
    throw InvalidInput("empty surface for CUI " + name.cui);
  }
  if (name.source.empty()) {
    throw InvalidInput("empty source tag for CUI " + name.cui);
  }
  if (triples_.contains({name.cui, name.surface, name.source})) {
    ++duplicates_;
    return false;
  }
  if (auto existing = concepts_.find(name.cui); name.preferred && existing != concepts_.end()) {
    for (const auto& other : existing->second.names) {
      if (other.preferred && other.source == name.source) {
        throw InvalidInput("second preferred name for " + name.cui + " in source " +
                           name.source);
      }
    }
  }
  triples_.emplace(name.cui, name.surface, name.source);
  auto [it, inserted] = concepts_.try_emplace(name.cui);
  Concept& c = it->second;
  if (inserted) c.cui = name.cui;
  name_index_[normalize(name.surface)].insert(name.cui);
  c.names.push_back(std::move(name));
  ++name_count_;
  return true;
}

void KnowledgeBase::add_semantic_type(const std::string& cui, const std::string& tui) {
  auto it = concepts_.find(cui);
  if (it == concepts_.end()) throw InvalidInput("unknown CUI " + cui);
  if (!std::regex_match(tui, kTuiRegex)) throw InvalidInput("malformed TUI '" + tui + "'");
  it->second.semantic_types.insert(tui);
}

void KnowledgeBase::add_edge(const std::string& child, const std::string& parent,
                             bool check_cycle) {
  if (!contains(child)) throw InvalidInput("hierarchy edge with unknown CUI " + child);
  if (!contains(parent)) throw InvalidInput("hierarchy edge with unknown CUI " + parent);
  if (child == parent) throw InvalidInput("self-loop on " + child);
  if (check_cycle && is_ancestor(child, parent)) {
    throw InvalidInput("edge " + child + " -> " + parent + " closes a cycle");
  }
  edges_.emplace(child, parent);
  parents_[child].insert(parent);
}

void KnowledgeBase::check_acyclic() const {
  // Iterative three-colour DFS over child -> parent edges.
  enum class Mark { fresh, active, done };
  std::map<std::string_view, Mark> marks;
  for (const auto& [start, unused] : parents_) {
    if (marks[start] != Mark::fresh) continue;
    std::vector<std::pair<std::string_view, std::set<std::string>::const_iterator>> stack;
    marks[start] = Mark::active;
    stack.emplace_back(start, parents_.find(start)->second.begin());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto& ps = parents_.find(node)->second;
      if (next == ps.end()) {
        marks[node] = Mark::done;
        stack.pop_back();
        continue;
      }
      const std::string& parent = *next++;
      const Mark m = marks[parent];
      if (m == Mark::active) throw InvalidInput("hierarchy cycle through " + parent);
      if (m == Mark::fresh) {
        marks[parent] = Mark::active;
        auto pit = parents_.find(parent);
        if (pit == parents_.end()) {
          marks[parent] = Mark::done;
        } else {
          stack.emplace_back(pit->first, pit->second.begin());
        }
      }
    }
  }
}

void KnowledgeBase::set_group(const std::string& tui, const std::string& group) {
  if (!std::regex_match(tui, kTuiRegex)) throw InvalidInput("malformed TUI '" + tui + "'");
  if (group.empty()) throw InvalidInput("empty group for " + tui);
  groups_[tui] = group;
}

void KnowledgeBase::set_retired(const std::string& cui, bool retired) {
  auto it = concepts_.find(cui);
  if (it == concepts_.end()) throw InvalidInput("unknown CUI " + cui);
  it->second.retired = retired;
}

bool KnowledgeBase::contains(std::string_view cui) const { return concepts_.contains(cui); }

const Concept& KnowledgeBase::at(std::string_view cui) const {
  auto it = concepts_.find(cui);
  if (it == concepts_.end()) throw InvalidInput("unknown CUI " + std::string(cui));
  return it->second;
}

const std::set<std::string>& KnowledgeBase::cuis_for(std::string_view normalized) const {
  auto it = name_index_.find(normalized);
  return it == name_index_.end() ? kEmptySet : it->second;
}

std::optional<std::string> KnowledgeBase::group_of(std::string_view tui) const {
  auto it = groups_.find(tui);
  if (it == groups_.end()) return std::nullopt;
  return it->second;
}

std::set<std::string> KnowledgeBase::groups_of_concept(std::string_view cui) const {
  std::set<std::string> out;
  for (const auto& tui : at(cui).semantic_types) {
    if (auto g = group_of(tui)) out.insert(*g);
  }
  return out;
}

bool KnowledgeBase::is_ancestor(std::string_view ancestor, std::string_view descendant) const {
  if (!contains(ancestor)) throw InvalidInput("unknown CUI " + std::string(ancestor));
  if (!contains(descendant)) throw InvalidInput("unknown CUI " + std::string(descendant));
  if (ancestor == descendant) return false;
  std::set<std::string_view> seen{descendant};
  std::deque<std::string_view> queue{descendant};
  while (!queue.empty()) {
    const auto node = queue.front();
    queue.pop_front();
    auto it = parents_.find(node);
    if (it == parents_.end()) continue;
    for (const auto& p : it->second) {
      if (p == ancestor) return true;
      if (seen.insert(p).second) queue.push_back(p);
    }
  }
  return false;
}

KbStats KnowledgeBase::stats() const {
  std::map<std::string, std::pair<std::size_t, std::set<std::string_view>>> per_source;
  for (const auto& [cui, c] : concepts_) {
    for (const auto& n : c.names) {
      auto& entry = per_source[n.source];
      ++entry.first;
      entry.second.insert(cui);
    }
  }
  KbStats s;
  for (const auto& [source, entry] : per_source) {
    s.per_source.push_back({source, entry.first, entry.second.size()});
  }
  s.total_names = name_count_;
  s.total_concepts = concepts_.size();
  return s;
}

// ---------------------------------------------------------------------------
// Files

namespace {

template <typename Fn>
void for_each_row(const std::string& path, std::string_view header, std::size_t columns,
                  Fn&& fn) {
  bool seen_header = false;
  io::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    if (!seen_header) {
      if (line != header) {
        throw LoadError(path, line_no, "expected header '" + std::string(header) + "'");
      }
      seen_header = true;
      return;
    }
    if (line.empty()) return;
    const auto fields = io::split_tabs(line);
    if (fields.size() != columns) {
      throw LoadError(path, line_no,
                      "expected " + std::to_string(columns) + " columns, found " +
                          std::to_string(fields.size()));
    }
    try {
      fn(fields, line_no);
    } catch (const LoadError&) {
      throw;
    } catch (const InvalidInput& e) {
      throw LoadError(path, line_no, e.what());
    }
  });
  if (!seen_header) throw LoadError(path, 1, "missing header");
}

constexpr std::string_view kConceptHeader = "cui\tsurface\tsource\tpreferred";
constexpr std::string_view kTypeHeader = "cui\ttui";
constexpr std::string_view kHierarchyHeader = "child_cui\tparent_cui";
constexpr std::string_view kGroupHeader = "tui\tgroup";

}  // namespace

KnowledgeBase load_concept_table(const std::string& path, KbLoadOptions options) {
  KnowledgeBase kb(std::move(options));
  for_each_row(path, kConceptHeader, 4, [&](const auto& f, std::size_t line_no) {
    if (f[3] != "0" && f[3] != "1") {
      throw LoadError(path, line_no, "preferred must be 0 or 1");
    }
    kb.add_name({std::string(f[1]), std::string(f[0]), std::string(f[2]), f[3] == "1"});
  });
  return kb;
}

void save_concept_table(const KnowledgeBase& kb, const std::string& path) {
  std::vector<const ConceptName*> rows;
  rows.reserve(kb.name_count());
  for (const auto& [cui, c] : kb.concepts()) {
    for (const auto& n : c.names) rows.push_back(&n);
  }
  std::sort(rows.begin(), rows.end(), [](const ConceptName* a, const ConceptName* b) {
    return std::tie(a->cui, a->surface, a->source) < std::tie(b->cui, b->surface, b->source);
  });
  std::string out(kConceptHeader);
  out += '\n';
  for (const auto* n : rows) {
    out += n->cui + '\t' + n->surface + '\t' + n->source + '\t' + (n->preferred ? "1" : "0") +
           '\n';
  }
  io::write_atomic(path, out);
}

void load_semantic_types(const std::string& path, KnowledgeBase& kb) {
  std::vector<std::string> unknown;
  std::vector<std::pair<std::string, std::string>> rows;
  for_each_row(path, kTypeHeader, 2, [&](const auto& f, std::size_t line_no) {
    std::string cui(f[0]);
    std::string tui(f[1]);
    if (!std::regex_match(tui, kTuiRegex)) {
      throw LoadError(path, line_no, "malformed TUI '" + tui + "'");
    }
    if (!kb.contains(cui)) {
      unknown.push_back(cui);
      return;
    }
    rows.emplace_back(std::move(cui), std::move(tui));
  });
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw DataError(path + ": semantic types for unknown CUIs: " + list);
  }
  for (const auto& [cui, tui] : rows) kb.add_semantic_type(cui, tui);
}

void load_hierarchy(const std::string& path, KnowledgeBase& kb) {
  for_each_row(path, kHierarchyHeader, 2, [&](const auto& f, std::size_t) {
    kb.add_edge(std::string(f[0]), std::string(f[1]), /*check_cycle=*/false);
  });
  try {
    kb.check_acyclic();
  } catch (const InvalidInput& e) {
    throw DataError(path + ": " + e.what());
  }
}

void load_semantic_groups(const std::string& path, KnowledgeBase& kb) {
  for_each_row(path, kGroupHeader, 2, [&](const auto& f, std::size_t) {
    kb.set_group(std::string(f[0]), std::string(f[1]));
  });
}

void load_retired(const std::string& path, KnowledgeBase& kb) {
  io::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    if (line.empty()) return;
    try {
      kb.set_retired(std::string(line));
    } catch (const InvalidInput& e) {
      throw LoadError(path, line_no, e.what());
    }
  });
}

void save_semantic_types(const KnowledgeBase& kb, const std::string& path) {
  std::string out(kTypeHeader);
  out += '\n';
  for (const auto& [cui, c] : kb.concepts()) {
    for (const auto& tui : c.semantic_types) out += cui + '\t' + tui + '\n';
  }
  io::write_atomic(path, out);
}

void save_hierarchy(const KnowledgeBase& kb, const std::string& path) {
  std::string out(kHierarchyHeader);
  out += '\n';
  for (const auto& [child, parent] : kb.edges()) out += child + '\t' + parent + '\n';
  io::write_atomic(path, out);
}

void save_semantic_groups(const KnowledgeBase& kb, const std::string& path) {
  std::string out(kGroupHeader);
  out += '\n';
  for (const auto& [tui, group] : kb.group_map()) out += tui + '\t' + group + '\n';
  io::write_atomic(path, out);
}

void save_retired(const KnowledgeBase& kb, const std::string& path) {
  std::string out;
  for (const auto& [cui, c] : kb.concepts()) {
    if (c.retired) out += cui + '\n';
  }
  io::write_atomic(path, out);
}

std::vector<LexiconEntry> load_lexicon(const std::string& path) {
  std::vector<LexiconEntry> entries;
  io::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    try {
      const auto j = nlohmann::json::parse(line);
      LexiconEntry e;
      e.headword = j.at("headword").get<std::string>();
      e.synonyms = j.value("synonyms", std::vector<std::string>{});
      if (unicode::trim(e.headword).empty()) throw InvalidInput("empty headword");
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path, line_no, e.what());
    } catch (const InvalidInput& e) {
      throw LoadError(path, line_no, e.what());
    }
  });
  return entries;
}

MergeReport merge_lexicon(KnowledgeBase& kb, const std::vector<LexiconEntry>& entries,
                          const Stemmer* stemmer) {
  // Snapshot of the pre-merge name keys so earlier merges cannot create
  // matches for later entries.
  std::map<std::string, std::set<std::string>, std::less<>> snapshot;
  if (stemmer == nullptr) {
    for (const auto& [key, cuis] : kb.name_index()) snapshot.emplace(key, cuis);
  } else {
    for (const auto& [cui, c] : kb.concepts()) {
      for (const auto& n : c.names) snapshot[normalize_and_stem(n.surface, stemmer)].insert(cui);
    }
  }

  MergeReport report;
  std::set<std::string> extended;
  for (const auto& entry : entries) {
    const auto it = snapshot.find(normalize_and_stem(entry.headword, stemmer));
    if (it == snapshot.end() || it->second.empty()) {
      ++report.skipped_unmatched;
      continue;
    }
    if (it->second.size() > 1) {
      ++report.skipped_ambiguous;
      continue;
    }
    const std::string& cui = *it->second.begin();
    std::vector<std::string> terms{entry.headword};
    terms.insert(terms.end(), entry.synonyms.begin(), entry.synonyms.end());
    for (const auto& term : terms) {
      if (unicode::trim(term).empty()) continue;
      if (kb.add_name({term, cui, std::string(kLexiconSource), false})) {
        ++report.names_added;
        extended.insert(cui);
      }
    }
  }
  report.cuis_extended = extended.size();
  return report;
}

KnowledgeBase load_kb(const std::string& path, KbLoadOptions options) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) return load_concept_table(path, std::move(options));
  const fs::path dir(path);
  KnowledgeBase kb = load_concept_table((dir / "concepts.tsv").string(), std::move(options));
  if (fs::exists(dir / "types.tsv")) load_semantic_types((dir / "types.tsv").string(), kb);
  if (fs::exists(dir / "hierarchy.tsv")) load_hierarchy((dir / "hierarchy.tsv").string(), kb);
  if (fs::exists(dir / "groups.tsv")) load_semantic_groups((dir / "groups.tsv").string(), kb);
  if (fs::exists(dir / "retired.txt")) load_retired((dir / "retired.txt").string(), kb);
  return kb;
}

void save_kb(const KnowledgeBase& kb, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path d(dir);
  save_concept_table(kb, (d / "concepts.tsv").string());
  save_semantic_types(kb, (d / "types.tsv").string());
  save_hierarchy(kb, (d / "hierarchy.tsv").string());
  save_semantic_groups(kb, (d / "groups.tsv").string());
  save_retired(kb, (d / "retired.txt").string());
}

}  // namespace normkit
