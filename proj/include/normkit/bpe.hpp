#pragma once

#include "normkit/text_prep.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace normkit {

inline constexpr std::string_view kEndOfWord = "</w>";

using TokenId = std::int32_t;

struct MergeRule {
  std::string left;
  std::string right;
  friend bool operator==(const MergeRule&, const MergeRule&) = default;
  friend auto operator<=>(const MergeRule&, const MergeRule&) = default;
};

using MergeList = std::vector<MergeRule>;

// Dense token <-> id map. Ids 0..3 are [PAD], [CLS], [SEP], [UNK].
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kCls = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kUnk = 3;

  Vocabulary();

  // Returns the existing id when the token is already present.
  TokenId add(std::string token);
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;  // throws InvalidInput
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static bool is_special(TokenId id) { return id >= 0 && id <= kUnk; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> ids_;
};

struct BpeModel {
  MergeList merges;
  Vocabulary vocab;
};

using WordCounts = std::vector<std::pair<std::string, std::uint64_t>>;

// Word frequencies of pre_tokenize()d texts, sorted by word.
WordCounts count_words(std::span<const std::string> texts);

// Learns up to `num_merges` merges. Each word is split into code points plus
// the end-of-word symbol; every round merges the most frequent adjacent pair,
// ties going to the lexicographically smallest (left, right).
// Throws InvalidInput on an empty corpus.
BpeModel train_bpe(const WordCounts& corpus, std::size_t num_merges);

// Applies merges in training order to one word; returns its symbols.
std::vector<std::string> segment_word(std::string_view word, const MergeList& merges);

std::vector<TokenId> encode(std::string_view text, const MergeList& merges,
                            const Vocabulary& vocab);
// Specials are dropped and "</w>" becomes a word break. Throws InvalidInput
// on an id outside the vocabulary.
std::string decode(std::span<const TokenId> ids, const Vocabulary& vocab);

// Tokenizer facade over a trained model with a precomputed merge-rank table.
class BpeTokenizer final : public Tokenizer {
 public:
  explicit BpeTokenizer(BpeModel model);

  std::vector<std::string> tokenize(std::string_view text) const override;
  std::vector<std::string> segment(std::string_view word) const;
  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;
  TokenId id_of(std::string_view token) const;

  const BpeModel& model() const { return model_; }

 private:
  BpeModel model_;
  // "left right" -> position in the merge list
  std::unordered_map<std::string, std::size_t> ranks_;
};

// BPE1: "left right" per line. VOC1: "token\tid" per line.
void save_merges(const MergeList& merges, const std::string& path);
MergeList load_merges(const std::string& path);
void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

// Loads <prefix>.merges and <prefix>.vocab.
BpeModel load_bpe(const std::string& prefix);
void save_bpe(const BpeModel& model, const std::string& prefix);

}  // namespace normkit
