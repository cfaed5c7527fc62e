#include "normkit/bpe.hpp"

#include "normkit/errors.hpp"
#include "normkit/io_util.hpp"
#include "normkit/unicode.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <set>

namespace normkit {

Vocabulary::Vocabulary() {
  for (const char* special : {"[PAD]", "[CLS]", "[SEP]", "[UNK]"}) add(special);
}

TokenId Vocabulary::add(std::string token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(std::move(token));
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InvalidInput("token id " + std::to_string(id) + " not in vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

WordCounts count_words(std::span<const std::string> texts) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& t : texts) {
    for (auto& w : pre_tokenize(t)) ++counts[std::move(w)];
  }
  return {counts.begin(), counts.end()};
}

namespace {

std::vector<std::string> initial_symbols(std::string_view word) {
  std::vector<std::string> symbols;
  for (char32_t c : unicode::decode(word)) symbols.push_back(unicode::encode(std::u32string(1, c)));
  symbols.emplace_back(kEndOfWord);
  return symbols;
}

// Merges every left-to-right, non-overlapping occurrence of (left, right).
bool merge_pair(std::vector<std::string>& symbols, std::string_view left, std::string_view right) {
  bool merged = false;
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      out.push_back(symbols[i] + symbols[i + 1]);
      ++i;
      merged = true;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
  return merged;
}

using Pair = std::pair<std::string, std::string>;

class PairTable {
 public:
  void adjust(const Pair& p, std::int64_t delta, std::size_t word) {
    auto& count = counts_[p];
    if (count > 0) ordered_.erase({-count, p});
    count += delta;
    if (count > 0) ordered_.insert({-count, p});
    if (delta > 0) where_[p].insert(word);
  }

  std::optional<Pair> best() const {
    if (ordered_.empty()) return std::nullopt;
    return ordered_.begin()->second;
  }

  std::set<std::size_t> words_with(const Pair& p) const {
    auto it = where_.find(p);
    return it == where_.end() ? std::set<std::size_t>{} : it->second;
  }

 private:
  std::map<Pair, std::int64_t> counts_;
  // (-count, pair): begin() is the most frequent, lexicographically smallest.
  std::set<std::pair<std::int64_t, Pair>> ordered_;
  std::map<Pair, std::set<std::size_t>> where_;
};

}  // namespace

BpeModel train_bpe(const WordCounts& corpus, std::size_t num_merges) {
  if (corpus.empty()) throw InvalidInput("BPE training corpus is empty");

  std::map<std::string, std::uint64_t> merged_counts;
  for (const auto& [word, count] : corpus) {
    if (!word.empty()) merged_counts[word] += count;
  }
  std::vector<std::vector<std::string>> words;
  std::vector<std::int64_t> counts;
  std::set<std::string> alphabet;
  for (const auto& [word, count] : merged_counts) {
    auto symbols = initial_symbols(word);
    alphabet.insert(symbols.begin(), symbols.end());
    if (count == 0) continue;
    if (count > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      throw InvalidInput("word count overflow for '" + word + "'");
    }
    words.push_back(std::move(symbols));
    counts.push_back(static_cast<std::int64_t>(count));
  }
  if (alphabet.empty()) throw InvalidInput("BPE training corpus is empty");

  BpeModel model;
  for (const auto& symbol : alphabet) model.vocab.add(symbol);

  PairTable table;
  auto account = [&](std::size_t w, std::int64_t sign) {
    const auto& s = words[w];
    for (std::size_t i = 0; i + 1 < s.size(); ++i) table.adjust({s[i], s[i + 1]}, sign * counts[w], w);
  };
  for (std::size_t w = 0; w < words.size(); ++w) account(w, +1);

  while (model.merges.size() < num_merges) {
    const auto best = table.best();
    if (!best) break;
    const auto& [left, right] = *best;
    model.merges.push_back({left, right});
    model.vocab.add(left + right);
    for (std::size_t w : table.words_with(*best)) {
      auto& s = words[w];
      bool present = false;
      for (std::size_t i = 0; i + 1 < s.size() && !present; ++i) {
        present = s[i] == left && s[i + 1] == right;
      }
      if (!present) continue;
      account(w, -1);
      merge_pair(s, left, right);
      account(w, +1);
    }
  }
  return model;
}

std::vector<std::string> segment_word(std::string_view word, const MergeList& merges) {
  auto symbols = initial_symbols(word);
  for (const auto& m : merges) {
    if (symbols.size() < 2) break;
    merge_pair(symbols, m.left, m.right);
  }
  return symbols;
}

std::vector<TokenId> encode(std::string_view text, const MergeList& merges,
                            const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (const auto& word : pre_tokenize(text)) {
    for (const auto& symbol : segment_word(word, merges)) {
      ids.push_back(vocab.find(symbol).value_or(Vocabulary::kUnk));
    }
  }
  return ids;
}

std::string decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : ids) {
    const std::string& token = vocab.token(id);
    if (Vocabulary::is_special(id)) continue;
    std::string_view view(token);
    if (view.ends_with(kEndOfWord)) {
      out.append(view.substr(0, view.size() - kEndOfWord.size()));
      out.push_back(' ');
    } else {
      out.append(view);
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

// ---------------------------------------------------------------------------

BpeTokenizer::BpeTokenizer(BpeModel model) : model_(std::move(model)) {
  for (std::size_t i = 0; i < model_.merges.size(); ++i) {
    ranks_.try_emplace(model_.merges[i].left + ' ' + model_.merges[i].right, i);
  }
}

std::vector<std::string> BpeTokenizer::segment(std::string_view word) const {
  // Replays the merge list in order, skipping merges with no occurrence:
  // each round applies the lowest-ranked present merge above the last one.
  auto symbols = initial_symbols(word);
  std::size_t floor_rank = 0;
  while (symbols.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best_at = 0;
    std::string key;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      key.assign(symbols[i]).append(1, ' ').append(symbols[i + 1]);
      auto it = ranks_.find(key);
      if (it != ranks_.end() && it->second >= floor_rank && it->second < best_rank) {
        best_rank = it->second;
        best_at = i;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const std::string left = symbols[best_at];
    const std::string right = symbols[best_at + 1];
    merge_pair(symbols, left, right);
    floor_rank = best_rank + 1;
  }
  return symbols;
}

std::vector<std::string> BpeTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> tokens;
  for (const auto& word : pre_tokenize(text)) {
    auto pieces = segment(word);
    tokens.insert(tokens.end(), std::make_move_iterator(pieces.begin()),
                  std::make_move_iterator(pieces.end()));
  }
  return tokens;
}

TokenId BpeTokenizer::id_of(std::string_view token) const {
  return model_.vocab.find(token).value_or(Vocabulary::kUnk);
}

std::vector<TokenId> BpeTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& token : tokenize(text)) ids.push_back(id_of(token));
  return ids;
}

std::string BpeTokenizer::decode(std::span<const TokenId> ids) const {
  return normkit::decode(ids, model_.vocab);
}

// ---------------------------------------------------------------------------
// Files

void save_merges(const MergeList& merges, const std::string& path) {
  std::string out;
  for (const auto& m : merges) out += m.left + ' ' + m.right + '\n';
  io::write_atomic(path, out);
}

MergeList load_merges(const std::string& path) {
  MergeList merges;
  std::set<MergeRule> seen;
  io::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    if (line.empty()) return;
    const auto space = line.find(' ');
    if (space == std::string_view::npos || space == 0 || space + 1 >= line.size() ||
        line.find(' ', space + 1) != std::string_view::npos) {
      throw LoadError(path, line_no, "expected 'left right'");
    }
    MergeRule rule{std::string(line.substr(0, space)), std::string(line.substr(space + 1))};
    if (!seen.insert(rule).second) throw LoadError(path, line_no, "duplicate merge");
    merges.push_back(std::move(rule));
  });
  return merges;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::string out;
  for (std::size_t i = 0; i < vocab.size(); ++i) out += vocab.tokens()[i] + '\t' + std::to_string(i) + '\n';
  io::write_atomic(path, out);
}

Vocabulary load_vocabulary(const std::string& path) {
  Vocabulary vocab;
  io::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    if (line.empty()) return;
    const auto fields = io::split_tabs(line);
    TokenId id = -1;
    if (fields.size() != 2 ||
        std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), id).ec != std::errc{}) {
      throw LoadError(path, line_no, "expected 'token<TAB>id'");
    }
    const std::string token(fields[0]);
    if (static_cast<std::size_t>(id) < vocab.size()) {
      if (vocab.token(id) != token) throw LoadError(path, line_no, "id conflicts with a special token");
      return;
    }
    if (static_cast<std::size_t>(id) != vocab.size() || vocab.find(token)) {
      throw LoadError(path, line_no, "ids must be dense and tokens unique");
    }
    vocab.add(token);
  });
  return vocab;
}

BpeModel load_bpe(const std::string& prefix) {
  return {load_merges(prefix + ".merges"), load_vocabulary(prefix + ".vocab")};
}

void save_bpe(const BpeModel& model, const std::string& prefix) {
  save_merges(model.merges, prefix + ".merges");
  save_vocabulary(model.vocab, prefix + ".vocab");
}

}  // namespace normkit
