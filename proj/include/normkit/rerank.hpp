#pragma once

#include "normkit/candidates.hpp"
#include "normkit/corpus.hpp"
#include "normkit/embed_linker.hpp"
#include "normkit/kb_store.hpp"
#include "normkit/text_prep.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace normkit {

struct RerankExample {
  std::string example_id;
  std::vector<std::string> sentence_tokens;
  TokenSpan mention_token_span;
  std::string gold_cui;
  std::vector<std::string> candidate_cuis;
};

struct RerankDatasetOptions {
  std::size_t negatives = 63;
  std::size_t max_tokens = 150;
  double split = 0.8;
  std::uint64_t seed = 0;
};

struct RerankDataset {
  std::vector<RerankExample> train;
  std::vector<RerankExample> validation;
  std::size_t excluded_too_long = 0;
};

// One example per gold-annotated mention: its sentence, the gold CUI and
// `negatives` distinct non-gold CUIs drawn uniformly from the non-retired
// concepts, shuffled together. Sentences over `max_tokens` are dropped.
// Throws DataError when a gold CUI is missing from the kb or the kb cannot
// supply enough negatives.
RerankDataset build_rerank_dataset(std::span<const Post> corpus, const KnowledgeBase& kb,
                                   const Tokenizer& tokenizer,
                                   const RerankDatasetOptions& options = {});

// RRK1 JSON-lines.
std::string serialize_rerank_example(const RerankExample& ex);
RerankExample parse_rerank_example(std::string_view json_line);
void save_rerank_examples(std::span<const RerankExample> examples, const std::string& path);
std::vector<RerankExample> load_rerank_examples(const std::string& path);

struct RerankContext {
  std::vector<std::string> sentence_tokens;
  TokenSpan mention_token_span;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const RerankContext& context, const Candidate& candidate) const = 0;
  // One entry per candidate; nullopt when scoring that candidate failed.
  virtual std::vector<std::optional<double>> score_all(const RerankContext& context,
                                                       std::span<const Candidate> candidates) const;
};

struct RerankResult {
  CandidateList candidates;
  // Per output position: the scorer failed and the candidate kept its place.
  std::vector<bool> failed;
};

// Stable sort by descending score. Failed (nullopt or non-finite) candidates
// stay at their incoming position with their old score; the others fill the
// remaining positions. Ranks are renumbered. Throws InvalidInput on an empty
// list or a score count mismatch.
RerankResult rerank_with_scores(const CandidateList& candidates,
                                std::span<const std::optional<double>> scores);
RerankResult rerank(const CandidateList& candidates, const RerankContext& context,
                    const Scorer& scorer);

// Cosine between the pooled sentence and the pooled candidate name.
std::unique_ptr<Scorer> baseline_context_scorer(std::shared_ptr<const Embedder> embedder,
                                                ExtractionConfig cfg);

// JSON-lines {example_id, scores}; a null score marks a failure.
std::map<std::string, std::vector<std::optional<double>>> load_scores(const std::string& path);

}  // namespace normkit
