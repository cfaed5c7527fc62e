#include "normkit/rerank.hpp"

#include "normkit/errors.hpp"
#include "normkit/io_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

namespace normkit {

using nlohmann::json;

namespace {

// Floyd's algorithm: k distinct values from [0, n).
std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::unordered_set<std::size_t> chosen;
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    const std::size_t value = chosen.insert(t).second ? t : j;
    if (value == j) chosen.insert(j);
    out.push_back(value);
  }
  return out;
}

}  // namespace

RerankDataset build_rerank_dataset(std::span<const Post> corpus, const KnowledgeBase& kb,
                                   const Tokenizer& tokenizer,
                                   const RerankDatasetOptions& options) {
  if (!(options.split >= 0.0 && options.split <= 1.0)) {
    throw InvalidInput("split fraction must lie in [0, 1]");
  }
  std::vector<std::string> pool;
  for (const auto& [cui, c] : kb.concepts()) {
    if (!c.retired) pool.push_back(cui);
  }
  std::mt19937_64 rng(options.seed);
  RerankDataset out;
  std::vector<RerankExample> examples;
  for (const auto& post : corpus) {
    for (const auto& m : post.mentions) {
      if (!m.gold_cui) throw DataError("mention '" + m.id + "' has no gold CUI");
      const std::string& gold = *m.gold_cui;
      if (!kb.contains(gold)) {
        throw DataError("gold CUI " + gold + " of mention '" + m.id + "' is not in the kb");
      }
      const auto ctx = sentence_context(post, m, tokenizer);
      auto tokens = ctx.tokens();
      if (tokens.size() > options.max_tokens) {
        ++out.excluded_too_long;
        continue;
      }
      const auto gold_pos = std::lower_bound(pool.begin(), pool.end(), gold);
      const bool gold_in_pool = gold_pos != pool.end() && *gold_pos == gold;
      const std::size_t available = pool.size() - (gold_in_pool ? 1 : 0);
      if (available < options.negatives) {
        throw DataError("kb has " + std::to_string(available) + " non-gold concepts, " +
                        std::to_string(options.negatives) + " negatives requested");
      }
      const auto skip = static_cast<std::size_t>(gold_pos - pool.begin());
      RerankExample ex;
      ex.example_id = m.id;
      ex.sentence_tokens = std::move(tokens);
      ex.mention_token_span = ctx.mention_token_span;
      ex.gold_cui = gold;
      ex.candidate_cuis.push_back(gold);
      for (std::size_t idx : sample_distinct(available, options.negatives, rng)) {
        if (gold_in_pool && idx >= skip) ++idx;
        ex.candidate_cuis.push_back(pool[idx]);
      }
      std::shuffle(ex.candidate_cuis.begin(), ex.candidate_cuis.end(), rng);
      examples.push_back(std::move(ex));
    }
  }
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(options.split * static_cast<double>(examples.size())));
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.train : out.validation).push_back(std::move(examples[order[i]]));
  }
  return out;
}

std::string serialize_rerank_example(const RerankExample& ex) {
  return json{{"example_id", ex.example_id},
              {"sentence", ex.sentence_tokens},
              {"mention_start_token", ex.mention_token_span.start},
              {"mention_end_token", ex.mention_token_span.end},
              {"gold_cui", ex.gold_cui},
              {"candidates", ex.candidate_cuis}}
      .dump();
}

RerankExample parse_rerank_example(std::string_view json_line) {
  const json j = json::parse(json_line);
  RerankExample ex;
  ex.example_id = j.at("example_id").get<std::string>();
  ex.sentence_tokens = j.at("sentence").get<std::vector<std::string>>();
  ex.mention_token_span = {j.at("mention_start_token").get<std::size_t>(),
                           j.at("mention_end_token").get<std::size_t>()};
  ex.gold_cui = j.at("gold_cui").get<std::string>();
  ex.candidate_cuis = j.at("candidates").get<std::vector<std::string>>();
  if (ex.mention_token_span.start > ex.mention_token_span.end ||
      ex.mention_token_span.end > ex.sentence_tokens.size()) {
    throw InvalidInput("mention token span outside the sentence");
  }
  if (std::find(ex.candidate_cuis.begin(), ex.candidate_cuis.end(), ex.gold_cui) ==
      ex.candidate_cuis.end()) {
    throw InvalidInput("gold CUI missing from the candidates");
  }
  return ex;
}

void save_rerank_examples(std::span<const RerankExample> examples, const std::string& path) {
  std::string out;
  for (const auto& ex : examples) {
    out += serialize_rerank_example(ex);
    out += '\n';
  }
  io::write_atomic(path, out);
}

std::vector<RerankExample> load_rerank_examples(const std::string& path) {
  std::vector<RerankExample> out;
  io::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    try {
      out.push_back(parse_rerank_example(line));
    } catch (const json::exception& e) {
      throw LoadError(path, line_no, e.what());
    } catch (const InvalidInput& e) {
      throw LoadError(path, line_no, e.what());
    }
  });
  return out;
}

std::vector<std::optional<double>> Scorer::score_all(const RerankContext& context,
                                                     std::span<const Candidate> candidates) const {
  std::vector<std::optional<double>> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    try {
      out.emplace_back(score(context, c));
    } catch (const std::exception&) {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

RerankResult rerank_with_scores(const CandidateList& candidates,
                                std::span<const std::optional<double>> scores) {
  if (candidates.empty()) throw InvalidInput("cannot rerank an empty candidate list");
  if (scores.size() != candidates.size()) {
    throw InvalidInput(std::to_string(scores.size()) + " scores for " +
                       std::to_string(candidates.size()) + " candidates");
  }
  const std::size_t n = candidates.size();
  std::vector<bool> failed(n);
  std::vector<std::size_t> movable;
  for (std::size_t i = 0; i < n; ++i) {
    failed[i] = !scores[i] || !std::isfinite(*scores[i]);
    if (!failed[i]) movable.push_back(i);
  }
  std::stable_sort(movable.begin(), movable.end(),
                   [&](std::size_t a, std::size_t b) { return *scores[a] > *scores[b]; });
  RerankResult result;
  result.candidates.reserve(n);
  result.failed = failed;
  auto next = movable.begin();
  for (std::size_t pos = 0; pos < n; ++pos) {
    Candidate c;
    if (failed[pos]) {
      c = candidates[pos];
    } else {
      c = candidates[*next];
      c.score = *scores[*next];
      ++next;
    }
    c.rank = pos + 1;
    result.candidates.push_back(std::move(c));
  }
  return result;
}

RerankResult rerank(const CandidateList& candidates, const RerankContext& context,
                    const Scorer& scorer) {
  if (candidates.empty()) throw InvalidInput("cannot rerank an empty candidate list");
  const auto scores = scorer.score_all(context, candidates);
  return rerank_with_scores(candidates, scores);
}

namespace {

class BaselineContextScorer final : public Scorer {
 public:
  BaselineContextScorer(std::shared_ptr<const Embedder> embedder, ExtractionConfig cfg)
      : embedder_(std::move(embedder)), cfg_(cfg) {}

  double score(const RerankContext& context, const Candidate& candidate) const override {
    const auto sentence = pool(embedder_->embed_tokens(context.sentence_tokens), cfg_);
    return score_against(sentence, candidate);
  }

  std::vector<std::optional<double>> score_all(
      const RerankContext& context, std::span<const Candidate> candidates) const override {
    const auto sentence = pool(embedder_->embed_tokens(context.sentence_tokens), cfg_);
    std::vector<std::optional<double>> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
      try {
        out.emplace_back(score_against(sentence, c));
      } catch (const InvalidInput&) {
        out.emplace_back(std::nullopt);
      }
    }
    return out;
  }

 private:
  double score_against(const std::vector<float>& sentence, const Candidate& candidate) const {
    const auto name = pool(embedder_->embed(candidate.name), cfg_);
    return cosine_similarity(std::span<const float>(sentence), std::span<const float>(name));
  }

  std::shared_ptr<const Embedder> embedder_;
  ExtractionConfig cfg_;
};

}  // namespace

std::unique_ptr<Scorer> baseline_context_scorer(std::shared_ptr<const Embedder> embedder,
                                                ExtractionConfig cfg) {
  if (!embedder) throw InvalidInput("baseline scorer needs an embedder");
  return std::make_unique<BaselineContextScorer>(std::move(embedder), cfg);
}

std::map<std::string, std::vector<std::optional<double>>> load_scores(const std::string& path) {
  std::map<std::string, std::vector<std::optional<double>>> out;
  io::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    try {
      const json j = json::parse(line);
      const auto id = j.at("example_id").get<std::string>();
      std::vector<std::optional<double>> scores;
      for (const auto& s : j.at("scores")) {
        if (s.is_null()) {
          scores.emplace_back(std::nullopt);
        } else {
          scores.emplace_back(s.get<double>());
        }
      }
      if (!out.emplace(id, std::move(scores)).second) {
        throw LoadError(path, line_no, "duplicate example_id '" + id + "'");
      }
    } catch (const json::exception& e) {
      throw LoadError(path, line_no, e.what());
    }
  });
  return out;
}

}  // namespace normkit
