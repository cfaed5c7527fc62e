#pragma once

#include "normkit/corpus.hpp"

#include <cstddef>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace normkit {

// NFC, lowercase, whitespace runs collapsed to one space, trimmed.
std::string normalize(std::string_view text);

class Stemmer {
 public:
  virtual ~Stemmer() = default;
  // Single word in, lowercase stem out.
  virtual std::string stem(std::string_view word) const = 0;
};

// One suffix-stripping rule. When `preceded_by` is non-empty the code point
// before the suffix must be one of its characters.
struct SuffixRule {
  std::u32string suffix;
  std::u32string replacement;
  std::u32string preceded_by;
};

// Table-driven German suffix stripper. Rules are tried longest suffix first;
// a rule fires only if the remaining stem keeps at least `min_stem` code
// points. Stripping repeats until no rule fires, so stem(stem(w)) == stem(w).
class GermanSuffixStemmer final : public Stemmer {
 public:
  GermanSuffixStemmer();
  explicit GermanSuffixStemmer(std::vector<SuffixRule> rules, std::size_t min_stem = 4);

  std::string stem(std::string_view word) const override;

  static std::vector<SuffixRule> default_rules();

 private:
  std::vector<SuffixRule> rules_;
  std::size_t min_stem_;
};

// normalize(), then stem every whitespace-separated word and re-join with
// single spaces. A null stemmer yields plain normalize().
std::string normalize_and_stem(std::string_view text, const Stemmer* stemmer);

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

const std::set<std::string>& default_abbreviations();

// Punctuation-rule sentence splitter. A sentence ends after a run of . ! ? …
// (plus closing quotes/brackets) that is followed by whitespace or end of
// text, unless the word carrying the punctuation is a known abbreviation.
// Blank lines always end a sentence. Spans are trimmed code-point ranges.
std::vector<CharSpan> split_sentences(std::string_view text);
std::vector<CharSpan> split_sentences(std::string_view text,
                                      const std::set<std::string>& abbreviations);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
};

// Splits on whitespace; every punctuation code point becomes its own word.
std::vector<std::string> pre_tokenize(std::string_view text);

class WordTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override {
    return pre_tokenize(text);
  }
};

struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct ContextualMention {
  std::vector<std::string> ctx_a;
  std::vector<std::string> mention_tokens;
  std::vector<std::string> ctx_b;
  TokenSpan mention_token_span;

  // ctx_a ++ mention_tokens ++ ctx_b
  std::vector<std::string> tokens() const;
};

// Left/right context budgets: ceil((total - m) / 2), floor((total - m) / 2).
std::pair<std::size_t, std::size_t> window_budget(std::size_t total_tokens,
                                                  std::size_t mention_tokens);

// Mention-centred window of at most `total_tokens` tokens. The post is
// tokenized in three segments (before, mention, after) so the mention's
// token boundaries are exact. Unused budget on one side is not moved to the
// other. Throws InvalidInput if the mention alone exceeds the budget.
ContextualMention context_window(const Post& post, const Mention& mention,
                                 const Tokenizer& tokenizer, std::size_t total_tokens = 64);

// Tokens of the sentence containing the mention. Sentences the mention
// straddles are merged.
ContextualMention sentence_context(const Post& post, const Mention& mention,
                                   const Tokenizer& tokenizer);

// Cuts an assembled context down to `total_tokens` with the window budgets.
ContextualMention clip_context(const ContextualMention& cm, std::size_t total_tokens);

// Groups duplicate mentions. Technical mentions match each other on surface
// or synonyms; a lay mention contributes only its synonyms, and a lay/technical
// pair matches on synonyms only. Groups are the transitive closure, listed by
// first member index; members are indices into `mentions`.
std::vector<std::vector<std::size_t>> unique_mentions(std::span<const Mention> mentions,
                                                      const Stemmer* stemmer = nullptr);

}  // namespace normkit
