#pragma once

#include "normkit/bpe.hpp"
#include "normkit/candidates.hpp"
#include "normkit/kb_store.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace normkit {

// n x d row-major float matrix with one id per row.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  std::vector<std::string> ids;

  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<float> row(std::size_t i) { return {data.data() + i * dim, dim}; }

  // Throws InvalidInput on shape mismatch, d == 0 or a non-finite entry.
  void validate() const;
};

enum class TokenKind : std::uint8_t { regular = 0, cls = 1, sep = 2, pad = 3 };

// Per-token vectors of one input sequence.
struct TokenEmbeddings {
  std::size_t tokens = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  std::vector<TokenKind> mask;

  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }

  // [CLS] only at position 0, pads form a suffix, shapes agree.
  void validate() const;
};

enum class ExtractionConfig { cls, nospec, all };

std::string_view to_string(ExtractionConfig cfg);
ExtractionConfig parse_extraction_config(std::string_view text);

// Cosine of the angle between v and w, accumulated in double.
// Throws InvalidInput on a zero vector or a dimension mismatch.
double cosine_similarity(std::span<const float> v, std::span<const float> w);
double cosine_similarity(std::span<const double> v, std::span<const double> w);

// cls: row 0 (must be flagged cls). nospec: mean of regular rows.
// all: mean of every non-pad row. Throws InvalidInput if nothing qualifies.
std::vector<float> pool(const TokenEmbeddings& te, ExtractionConfig cfg);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual TokenEmbeddings embed(std::string_view text) const = 0;
  // Embeds an already tokenized sequence ([CLS]/[SEP] are added). A sequence
  // without end-of-word markers is taken as plain words.
  virtual TokenEmbeddings embed_tokens(std::span<const std::string> tokens) const = 0;
};

// Deterministic stand-in for a transformer: each token row is a seeded random
// vector for its vocabulary id plus a signed hashed bag of the token's
// character trigrams. Sequences are wrapped in [CLS] ... [SEP]; embed()
// normalizes its text before tokenizing.
class BuiltinEmbedder final : public Embedder {
 public:
  BuiltinEmbedder(BpeTokenizer tokenizer, std::size_t dim, std::uint64_t seed);

  std::size_t dim() const override { return dim_; }
  TokenEmbeddings embed(std::string_view text) const override;
  TokenEmbeddings embed_tokens(std::span<const std::string> tokens) const override;

  const BpeTokenizer& tokenizer() const { return tokenizer_; }

  // Trigrams of "#token#" ("</w>" rendered as a trailing '$').
  static std::vector<std::string> trigrams(std::string_view token);
  std::vector<float> trigram_vector(std::string_view token) const;

 private:
  void append_row(TokenEmbeddings& te, TokenId id, std::string_view token, TokenKind kind) const;

  BpeTokenizer tokenizer_;
  std::size_t dim_;
  std::uint64_t seed_;
  std::vector<float> table_;  // vocab_size x dim
};

// (id, text) pairs for every name of every non-retired concept; ids are
// "<cui>\t<surface>".
std::vector<std::pair<std::string, std::string>> index_names(const KnowledgeBase& kb);

// One pooled row per input text.
EmbeddingMatrix build_embedding_index(std::span<const std::pair<std::string, std::string>> names,
                                      const Embedder& embedder, ExtractionConfig cfg,
                                      std::size_t threads = 1);
EmbeddingMatrix build_embedding_index(const KnowledgeBase& kb, const Embedder& embedder,
                                      ExtractionConfig cfg, std::size_t threads = 1);

// Pools pre-computed per-token records into an EmbeddingMatrix.
EmbeddingMatrix pool_records(std::span<const TokenEmbeddings> records,
                             std::vector<std::string> ids, ExtractionConfig cfg);

// Read-only search structure over a name embedding matrix whose ids are
// "<cui>\t<name>". Row norms and tie-break ranks are precomputed.
class EmbeddingIndex {
 public:
  explicit EmbeddingIndex(EmbeddingMatrix matrix);

  const EmbeddingMatrix& matrix() const { return matrix_; }
  std::size_t dim() const { return matrix_.dim; }
  const std::string& cui(std::size_t row) const { return cuis_[row]; }
  const std::string& name(std::size_t row) const { return names_[row]; }

  // Names ranked by descending cosine, reduced to the best `k` distinct CUIs;
  // ties break by (cui, name).
  CandidateList link(std::span<const float> query, std::size_t k = kDefaultTopK) const;

  // Row i of `queries` is linked; one scan of the index serves a block of
  // queries. Output order follows the query rows.
  std::vector<CandidateList> link_batch(const EmbeddingMatrix& queries,
                                        std::size_t k = kDefaultTopK,
                                        std::size_t threads = 1) const;

 private:
  EmbeddingMatrix matrix_;
  std::vector<double> norms_;
  std::vector<std::string> cuis_;
  std::vector<std::string> names_;
  std::vector<std::uint32_t> cui_rank_;
  std::vector<std::uint32_t> item_rank_;  // position in (cui, name) order
  std::vector<std::uint32_t> item_row_;
};

CandidateList link_embedding(const EmbeddingIndex& index, std::span<const float> query,
                             std::size_t k = kDefaultTopK);

// EMB1 at `path` plus IDS1 sidecar at `path + ".ids"`.
void save_embeddings(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix load_embeddings(const std::string& path);

// A TOK1 file is a sequence of records: "TOK1", u32 t, u32 d, t*d floats,
// t mask bytes. The optional sidecar `path + ".ids"` names the records.
void save_token_records(std::span<const TokenEmbeddings> records, const std::string& path);
std::vector<TokenEmbeddings> load_token_records(const std::string& path);

}  // namespace normkit
