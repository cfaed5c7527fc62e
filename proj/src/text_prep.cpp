#include "normkit/text_prep.hpp"

#include "normkit/errors.hpp"
#include "normkit/unicode.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace normkit {

std::string normalize(std::string_view text) {
  const std::string folded = unicode::nfc(unicode::to_lower(unicode::nfc(text)));
  std::string out;
  out.reserve(folded.size());
  bool pending_space = false;
  for (const auto& word : unicode::split_whitespace(folded)) {
    if (pending_space) out.push_back(' ');
    out += word;
    pending_space = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stemming

std::vector<SuffixRule> GermanSuffixStemmer::default_rules() {
  return {
      {U"ungen", U"ung", U""},
      {U"nden", U"", U""},
      {U"itis", U"", U""},
      {U"es", U"", U""},
      {U"en", U"", U""},
      {U"e", U"", U""},
      {U"s", U"", U"bdfghklmnrt"},
      {U"n", U"", U"e"},
  };
}

GermanSuffixStemmer::GermanSuffixStemmer() : GermanSuffixStemmer(default_rules()) {}

GermanSuffixStemmer::GermanSuffixStemmer(std::vector<SuffixRule> rules, std::size_t min_stem)
    : rules_(std::move(rules)), min_stem_(min_stem) {
  for (const auto& r : rules_) {
    if (r.suffix.empty() || r.replacement.size() >= r.suffix.size()) {
      throw InvalidInput("suffix rules must strictly shorten the word");
    }
  }
  std::stable_sort(rules_.begin(), rules_.end(), [](const SuffixRule& a, const SuffixRule& b) {
    return a.suffix.size() > b.suffix.size();
  });
}

std::string GermanSuffixStemmer::stem(std::string_view word) const {
  std::u32string w = unicode::decode(normalize(word));
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& r : rules_) {
      if (w.size() < r.suffix.size() || !w.ends_with(r.suffix)) continue;
      const std::size_t base = w.size() - r.suffix.size();
      if (base + r.replacement.size() < min_stem_) continue;
      if (!r.preceded_by.empty() &&
          (base == 0 || r.preceded_by.find(w[base - 1]) == std::u32string::npos)) {
        continue;
      }
      w.resize(base);
      w += r.replacement;
      changed = true;
      break;
    }
  }
  return unicode::encode(w);
}

std::string normalize_and_stem(std::string_view text, const Stemmer* stemmer) {
  std::string norm = normalize(text);
  if (stemmer == nullptr) return norm;
  std::string out;
  out.reserve(norm.size());
  for (const auto& word : unicode::split_whitespace(norm)) {
    if (!out.empty()) out.push_back(' ');
    out += stemmer->stem(word);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sentences

const std::set<std::string>& default_abbreviations() {
  static const std::set<std::string> abbreviations = {
      "z.b.", "bzw.", "usw.", "d.h.", "ca.",  "dr.",   "prof.", "evtl.", "ggf.",
      "u.a.", "etc.", "vgl.", "z.t.", "s.o.", "s.u.",  "o.ä.",  "u.u.",  "inkl.",
      "bspw.", "nr.", "str.", "max.", "min.", "mind.", "std.",  "tägl.", "allg.",
  };
  return abbreviations;
}

std::vector<CharSpan> split_sentences(std::string_view text) {
  return split_sentences(text, default_abbreviations());
}

namespace {

bool is_terminal(char32_t c) { return c == U'.' || c == U'!' || c == U'?' || c == U'…'; }

bool is_closer(char32_t c) {
  return c == U'"' || c == U'\'' || c == U')' || c == U']' || c == U'»' || c == U'«' ||
         c == U'“' || c == U'”' || c == U'’';
}

void push_trimmed(const std::u32string& cps, std::size_t b, std::size_t e,
                  std::vector<CharSpan>& out) {
  while (b < e && unicode::is_space(cps[b])) ++b;
  while (e > b && unicode::is_space(cps[e - 1])) --e;
  if (b < e) out.push_back({b, e});
}

}  // namespace

std::vector<CharSpan> split_sentences(std::string_view text,
                                      const std::set<std::string>& abbreviations) {
  const std::u32string cps = unicode::decode(text);
  const std::size_t n = cps.size();
  std::vector<CharSpan> out;
  std::size_t sentence_start = 0;
  std::size_t i = 0;
  while (i < n) {
    const char32_t c = cps[i];
    if (c == U'\n') {
      std::size_t j = i + 1;
      bool blank_line = false;
      while (j < n && unicode::is_space(cps[j])) {
        if (cps[j] == U'\n') blank_line = true;
        ++j;
      }
      if (blank_line) {
        push_trimmed(cps, sentence_start, i, out);
        sentence_start = j;
      }
      i = j;
      continue;
    }
    if (!is_terminal(c)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && (is_terminal(cps[j]) || is_closer(cps[j]))) ++j;
    if (j < n && !unicode::is_space(cps[j])) {
      i = j;
      continue;
    }
    std::size_t word_start = i;
    while (word_start > sentence_start && !unicode::is_space(cps[word_start - 1])) --word_start;
    while (word_start < i && (cps[word_start] == U'(' || cps[word_start] == U'"' ||
                              cps[word_start] == U'„' || cps[word_start] == U'[')) {
      ++word_start;
    }
    const std::string word =
        unicode::to_lower(unicode::encode(std::u32string_view(cps).substr(word_start, j - word_start)));
    if (!abbreviations.contains(word)) {
      push_trimmed(cps, sentence_start, j, out);
      sentence_start = j;
    }
    i = j;
  }
  push_trimmed(cps, sentence_start, n, out);
  return out;
}

// ---------------------------------------------------------------------------
// Tokens and contexts

std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::u32string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(unicode::encode(current));
      current.clear();
    }
  };
  for (char32_t c : unicode::decode(text)) {
    if (unicode::is_space(c)) {
      flush();
    } else if (unicode::is_punct(c)) {
      flush();
      out.push_back(unicode::encode(std::u32string(1, c)));
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

std::vector<std::string> ContextualMention::tokens() const {
  std::vector<std::string> all;
  all.reserve(ctx_a.size() + mention_tokens.size() + ctx_b.size());
  all.insert(all.end(), ctx_a.begin(), ctx_a.end());
  all.insert(all.end(), mention_tokens.begin(), mention_tokens.end());
  all.insert(all.end(), ctx_b.begin(), ctx_b.end());
  return all;
}

std::pair<std::size_t, std::size_t> window_budget(std::size_t total_tokens,
                                                  std::size_t mention_tokens) {
  if (mention_tokens > total_tokens) {
    throw InvalidInput("mention has " + std::to_string(mention_tokens) +
                       " tokens, more than the window of " + std::to_string(total_tokens));
  }
  const std::size_t rest = total_tokens - mention_tokens;
  return {(rest + 1) / 2, rest / 2};
}

namespace {

ContextualMention assemble(std::vector<std::string> before, std::vector<std::string> mention,
                           std::vector<std::string> after) {
  ContextualMention cm;
  cm.ctx_a = std::move(before);
  cm.mention_tokens = std::move(mention);
  cm.ctx_b = std::move(after);
  cm.mention_token_span = {cm.ctx_a.size(), cm.ctx_a.size() + cm.mention_tokens.size()};
  return cm;
}

}  // namespace

ContextualMention clip_context(const ContextualMention& cm, std::size_t total_tokens) {
  const auto [left, right] = window_budget(total_tokens, cm.mention_tokens.size());
  const std::size_t take_a = std::min(left, cm.ctx_a.size());
  const std::size_t take_b = std::min(right, cm.ctx_b.size());
  return assemble({cm.ctx_a.end() - static_cast<std::ptrdiff_t>(take_a), cm.ctx_a.end()},
                  cm.mention_tokens,
                  {cm.ctx_b.begin(), cm.ctx_b.begin() + static_cast<std::ptrdiff_t>(take_b)});
}

ContextualMention context_window(const Post& post, const Mention& mention,
                                 const Tokenizer& tokenizer, std::size_t total_tokens) {
  const std::size_t length = unicode::length(post.text);
  if (mention.start >= mention.end || mention.end > length) {
    throw InvalidInput("mention '" + mention.id + "' lies outside post '" + post.id + "'");
  }
  auto mention_tokens =
      tokenizer.tokenize(unicode::substr(post.text, mention.start, mention.end));
  window_budget(total_tokens, mention_tokens.size());  // validates
  const ContextualMention full =
      assemble(tokenizer.tokenize(unicode::substr(post.text, 0, mention.start)),
               std::move(mention_tokens),
               tokenizer.tokenize(unicode::substr(post.text, mention.end, length)));
  return clip_context(full, total_tokens);
}

ContextualMention sentence_context(const Post& post, const Mention& mention,
                                   const Tokenizer& tokenizer) {
  const std::size_t length = unicode::length(post.text);
  if (mention.start >= mention.end || mention.end > length) {
    throw InvalidInput("mention '" + mention.id + "' lies outside post '" + post.id + "'");
  }
  std::size_t begin = mention.start;
  std::size_t end = mention.end;
  for (const auto& s : split_sentences(post.text)) {
    if (s.start < mention.end && mention.start < s.end) {
      begin = std::min(begin, s.start);
      end = std::max(end, s.end);
    }
  }
  return assemble(tokenizer.tokenize(unicode::substr(post.text, begin, mention.start)),
                  tokenizer.tokenize(unicode::substr(post.text, mention.start, mention.end)),
                  tokenizer.tokenize(unicode::substr(post.text, mention.end, end)));
}

// ---------------------------------------------------------------------------
// Unique mentions

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<std::vector<std::size_t>> unique_mentions(std::span<const Mention> mentions,
                                                      const Stemmer* stemmer) {
  // key -> mentions that expose it in the technical pool / in the synonym pool
  std::map<std::string, std::vector<std::size_t>> technical_pool;
  std::map<std::string, std::vector<std::size_t>> synonym_pool;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const Mention& m = mentions[i];
    for (const auto& syn : m.synonyms) {
      const std::string key = normalize_and_stem(syn, stemmer);
      if (key.empty()) continue;
      synonym_pool[key].push_back(i);
      if (m.kind == MentionKind::technical) technical_pool[key].push_back(i);
    }
    if (m.kind == MentionKind::technical) {
      const std::string key = normalize_and_stem(m.surface, stemmer);
      if (!key.empty()) technical_pool[key].push_back(i);
    }
  }
  DisjointSets sets(mentions.size());
  for (const auto* pool : {&technical_pool, &synonym_pool}) {
    for (const auto& [key, members] : *pool) {
      for (std::size_t k = 1; k < members.size(); ++k) sets.unite(members[0], members[k]);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < mentions.size(); ++i) by_root[sets.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(by_root.size());
  for (auto& [root, members] : by_root) groups.push_back(std::move(members));
  return groups;
}

}  // namespace normkit
