#include "cli.hpp"

#include "normkit/bpe.hpp"
#include "normkit/corpus.hpp"
#include "normkit/embed_linker.hpp"
#include "normkit/error_analysis.hpp"
#include "normkit/errors.hpp"
#include "normkit/io_util.hpp"
#include "normkit/kb_store.hpp"
#include "normkit/metrics.hpp"
#include "normkit/parallel.hpp"
#include "normkit/rerank.hpp"
#include "normkit/self_align.hpp"
#include "normkit/string_linker.hpp"
#include "normkit/text_prep.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

namespace normkit {

namespace {

using nlohmann::json;

struct Options {
  std::size_t threads = 0;

  std::string kb;
  std::string concepts;
  std::string types;
  std::string hierarchy;
  std::string groups;
  std::string retired;
  std::string cui_pattern = "C[0-9]{7}";
  std::string lexicon;
  bool stem = false;

  std::string corpus;
  std::string bpe;
  std::size_t merges = 2000;
  std::size_t dim = 128;
  std::uint64_t seed = 13;
  std::string config = "all";
  std::string context = "none";
  std::size_t window_tokens = 64;
  std::size_t max_sentence_tokens = 150;
  std::string tokens;

  std::string index;
  std::string embeddings;
  std::size_t k = kDefaultTopK;
  bool similarity = false;
  bool no_stem = false;
  bool allow_mixed_config = false;

  std::size_t negatives = 63;
  double split = 0.8;
  std::string predictions;
  std::string scores;

  std::string train_config;
  std::size_t batch_size = 32;
  std::size_t d_out = 0;
  double init_noise = 0.0;

  std::string csv;
  std::string labels;
  std::string out;
};

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1U, std::thread::hardware_concurrency());
}

// Every option of the leaf command and its parents, resolved.
json manifest_for(const CLI::App* leaf) {
  json options = json::object();
  std::string command;
  for (const CLI::App* app = leaf; app != nullptr; app = app->get_parent()) {
    if (app->get_parent() != nullptr) command = app->get_name() + (command.empty() ? "" : " ") + command;
    for (const CLI::Option* opt : app->get_options()) {
      const std::string name = opt->get_name();
      if (name == "--help" || name == "--help-all" || options.contains(name)) continue;
      if (opt->count() > 0) {
        const auto& results = opt->results();
        options[name] = results.size() == 1 ? json(results.front()) : json(results);
      } else {
        options[name] = opt->get_default_str();
      }
    }
  }
  return {{"command", command}, {"options", std::move(options)}};
}

void write_manifest(const CLI::App* leaf, const std::string& out) {
  if (out.empty()) return;
  io::write_atomic(out + ".manifest.json", manifest_for(leaf).dump(2) + "\n");
}

std::optional<std::string> recorded_config(const std::string& path) {
  const std::string manifest = path + ".manifest.json";
  if (!std::filesystem::exists(manifest)) return std::nullopt;
  try {
    const json j = json::parse(io::read_file(manifest));
    const auto& opts = j.at("options");
    if (opts.contains("--config")) return opts.at("--config").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(manifest + ": " + e.what());
  }
  return std::nullopt;
}

class NormalizingTokenizer final : public Tokenizer {
 public:
  explicit NormalizingTokenizer(const Tokenizer& inner) : inner_(inner) {}
  std::vector<std::string> tokenize(std::string_view text) const override {
    return inner_.tokenize(normalize(text));
  }

 private:
  const Tokenizer& inner_;
};

std::shared_ptr<BuiltinEmbedder> make_embedder(const Options& o) {
  if (o.bpe.empty()) throw CLI::RequiredError("--bpe");
  return std::make_shared<BuiltinEmbedder>(BpeTokenizer(load_bpe(o.bpe)), o.dim, o.seed);
}

// Token sequence fed to the embedder for one mention.
std::vector<std::string> mention_tokens(const Post& post, const Mention& m,
                                        const Tokenizer& tokenizer, const Options& o) {
  if (o.context == "window") return context_window(post, m, tokenizer, o.window_tokens).tokens();
  if (o.context == "sentence") {
    return clip_context(sentence_context(post, m, tokenizer), o.max_sentence_tokens).tokens();
  }
  return tokenizer.tokenize(m.surface);
}

EmbeddingMatrix embed_mentions(const std::vector<Post>& corpus, const Options& o) {
  const auto cfg = parse_extraction_config(o.config);
  if (!o.tokens.empty()) {
    auto records = load_token_records(o.tokens);
    std::vector<std::string> ids;
    io::for_each_line(o.tokens + ".ids",
                      [&](std::string_view line, std::size_t) { ids.emplace_back(line); });
    return pool_records(records, std::move(ids), cfg);
  }
  const auto embedder = make_embedder(o);
  const NormalizingTokenizer tokenizer(embedder->tokenizer());
  std::vector<std::pair<const Post*, const Mention*>> mentions;
  for (const auto& post : corpus) {
    for (const auto& m : post.mentions) mentions.emplace_back(&post, &m);
  }
  EmbeddingMatrix matrix;
  matrix.rows = mentions.size();
  matrix.dim = embedder->dim();
  matrix.data.resize(matrix.rows * matrix.dim);
  for (const auto& [post, m] : mentions) matrix.ids.push_back(m->id);
  parallel_for(mentions.size(), resolve_threads(o.threads), [&](std::size_t i) {
    const auto& [post, m] = mentions[i];
    const auto tokens = mention_tokens(*post, *m, tokenizer, o);
    const auto v = pool(embedder->embed_tokens(tokens), cfg);
    std::copy(v.begin(), v.end(), matrix.row(i).begin());
  });
  return matrix;
}

EmbeddingMatrix embed_index(const Options& o) {
  const auto cfg = parse_extraction_config(o.config);
  if (!o.tokens.empty()) {
    auto records = load_token_records(o.tokens);
    std::vector<std::string> ids;
    io::for_each_line(o.tokens + ".ids",
                      [&](std::string_view line, std::size_t) { ids.emplace_back(line); });
    return pool_records(records, std::move(ids), cfg);
  }
  if (o.kb.empty()) throw CLI::RequiredError("--kb");
  const auto kb = load_kb(o.kb, {o.cui_pattern});
  const auto embedder = make_embedder(o);
  return build_embedding_index(kb, *embedder, cfg, resolve_threads(o.threads));
}

void print_stats(const KnowledgeBase& kb, std::ostream& out) {
  const auto s = kb.stats();
  out << "source\tnames\tconcepts\n";
  for (const auto& row : s.per_source) out << row.source << '\t' << row.names << '\t' << row.concepts << '\n';
  out << "total\t" << s.total_names << '\t' << s.total_concepts << '\n';
}

std::vector<Post> require_corpus(const Options& o) {
  if (o.corpus.empty()) throw CLI::RequiredError("--corpus");
  return load_corpus(o.corpus);
}

// ---------------------------------------------------------------------------
// Commands

void kb_build(const Options& o, std::ostream& out) {
  KnowledgeBase kb = load_concept_table(o.concepts, {o.cui_pattern});
  if (!o.types.empty()) load_semantic_types(o.types, kb);
  if (!o.hierarchy.empty()) load_hierarchy(o.hierarchy, kb);
  if (!o.groups.empty()) load_semantic_groups(o.groups, kb);
  if (!o.retired.empty()) load_retired(o.retired, kb);
  save_kb(kb, o.out);
  print_stats(kb, out);
  if (kb.duplicate_names_skipped() > 0) {
    out << "duplicates_skipped\t" << kb.duplicate_names_skipped() << '\n';
  }
}

void kb_merge(const Options& o, std::ostream& out) {
  KnowledgeBase kb = load_kb(o.kb, {o.cui_pattern});
  const GermanSuffixStemmer stemmer;
  const auto report = merge_lexicon(kb, load_lexicon(o.lexicon), o.stem ? &stemmer : nullptr);
  save_kb(kb, o.out);
  out << json{{"cuis_extended", report.cuis_extended},
              {"names_added", report.names_added},
              {"skipped_ambiguous", report.skipped_ambiguous},
              {"skipped_unmatched", report.skipped_unmatched}}
             .dump()
      << '\n';
}

void kb_stats(const Options& o, std::ostream& out) { print_stats(load_kb(o.kb, {o.cui_pattern}), out); }

void bpe_train(const Options& o, std::ostream& out) {
  const auto kb = load_kb(o.kb, {o.cui_pattern});
  std::vector<std::string> texts;
  for (const auto& [cui, c] : kb.concepts()) {
    for (const auto& n : c.names) texts.push_back(normalize(n.surface));
  }
  if (!o.corpus.empty()) {
    for (const auto& post : load_corpus(o.corpus)) texts.push_back(normalize(post.text));
  }
  const auto model = train_bpe(count_words(texts), o.merges);
  save_bpe(model, o.out);
  out << "merges\t" << model.merges.size() << "\nvocabulary\t" << model.vocab.size() << '\n';
}

void embed_index_cmd(const Options& o, std::ostream& out) {
  const auto m = embed_index(o);
  save_embeddings(m, o.out);
  out << "rows\t" << m.rows << "\ndim\t" << m.dim << '\n';
}

void embed_mentions_cmd(const Options& o, std::ostream& out) {
  const auto corpus = o.tokens.empty() ? require_corpus(o) : std::vector<Post>{};
  const auto m = embed_mentions(corpus, o);
  save_embeddings(m, o.out);
  out << "rows\t" << m.rows << "\ndim\t" << m.dim << '\n';
}

void link_string_cmd(const Options& o, std::ostream& out) {
  const auto kb = load_kb(o.kb, {o.cui_pattern});
  StringPipeline pipeline;
  if (o.no_stem) pipeline.stemmer = nullptr;
  pipeline.score = o.similarity ? StringScore::similarity : StringScore::negative_distance;
  const auto index = build_string_index(kb, pipeline);
  std::vector<MentionQuery> queries;
  for (const auto& post : require_corpus(o)) {
    for (const auto& m : post.mentions) queries.push_back({m.id, m.surface});
  }
  const auto predictions = link_string_batch(index, queries, o.k, resolve_threads(o.threads));
  save_predictions(predictions, o.out);
  out << "mentions\t" << predictions.size() << '\n';
}

void link_embed_cmd(const Options& o, std::ostream& out) {
  const std::string index_cfg = o.index.empty() ? o.config : recorded_config(o.index).value_or(o.config);
  const std::string mention_cfg =
      o.embeddings.empty() ? o.config : recorded_config(o.embeddings).value_or(o.config);
  if (index_cfg != mention_cfg && !o.allow_mixed_config) {
    throw DataError("index uses extraction config '" + index_cfg + "' but mentions use '" +
                    mention_cfg + "'; pass --allow-mixed-config to proceed");
  }
  const EmbeddingIndex index(o.index.empty() ? embed_index(o) : load_embeddings(o.index));
  const EmbeddingMatrix queries =
      o.embeddings.empty() ? embed_mentions(require_corpus(o), o) : load_embeddings(o.embeddings);
  const auto lists = index.link_batch(queries, o.k, resolve_threads(o.threads));
  std::vector<Prediction> predictions;
  predictions.reserve(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) predictions.push_back({queries.ids[i], lists[i]});
  save_predictions(predictions, o.out);
  out << "mentions\t" << predictions.size() << '\n';
}

void rerank_build(const Options& o, std::ostream& out) {
  const auto kb = load_kb(o.kb, {o.cui_pattern});
  const auto corpus = require_corpus(o);
  std::unique_ptr<Tokenizer> base;
  if (o.bpe.empty()) {
    base = std::make_unique<WordTokenizer>();
  } else {
    base = std::make_unique<BpeTokenizer>(load_bpe(o.bpe));
  }
  const NormalizingTokenizer tokenizer(*base);
  const auto data = build_rerank_dataset(
      corpus, kb, tokenizer, {o.negatives, o.max_sentence_tokens, o.split, o.seed});
  save_rerank_examples(data.train, o.out + ".train.jsonl");
  save_rerank_examples(data.validation, o.out + ".validation.jsonl");
  out << "train\t" << data.train.size() << "\nvalidation\t" << data.validation.size()
      << "\nexcluded_too_long\t" << data.excluded_too_long << '\n';
}

void rerank_apply(const Options& o, std::ostream& out) {
  const auto predictions = load_predictions(o.predictions);
  std::vector<Prediction> result;
  std::size_t failures = 0;
  auto record = [&](const Prediction& p, const RerankResult& r) {
    for (bool f : r.failed) failures += f ? 1 : 0;
    result.push_back({p.mention_id, r.candidates});
  };
  if (!o.scores.empty()) {
    const auto scores = load_scores(o.scores);
    for (const auto& p : predictions) {
      if (p.candidates.empty()) {
        result.push_back(p);
        continue;
      }
      const auto it = scores.find(p.mention_id);
      if (it == scores.end()) throw DataError("no scores for mention '" + p.mention_id + "'");
      if (it->second.size() != p.candidates.size()) {
        throw DataError("mention '" + p.mention_id + "' has " + std::to_string(it->second.size()) +
                        " scores for " + std::to_string(p.candidates.size()) + " candidates");
      }
      record(p, rerank_with_scores(p.candidates, it->second));
    }
  } else {
    const auto corpus = require_corpus(o);
    std::map<std::string, std::pair<const Post*, const Mention*>, std::less<>> by_id;
    for (const auto& post : corpus) {
      for (const auto& m : post.mentions) by_id[m.id] = {&post, &m};
    }
    const auto embedder = make_embedder(o);
    const NormalizingTokenizer tokenizer(embedder->tokenizer());
    const auto scorer = baseline_context_scorer(embedder, parse_extraction_config(o.config));
    for (const auto& p : predictions) {
      if (p.candidates.empty()) {
        result.push_back(p);
        continue;
      }
      const auto it = by_id.find(p.mention_id);
      if (it == by_id.end()) throw DataError("mention '" + p.mention_id + "' is not in the corpus");
      const auto ctx = clip_context(sentence_context(*it->second.first, *it->second.second, tokenizer),
                                    o.max_sentence_tokens);
      record(p, rerank(p.candidates, {ctx.tokens(), ctx.mention_token_span}, *scorer));
    }
  }
  save_predictions(result, o.out);
  out << "mentions\t" << result.size() << "\nscorer_failures\t" << failures << '\n';
}

void align_train(const Options& o, std::ostream& out) {
  const auto m = load_embeddings(o.embeddings);
  TrainConfig config = o.train_config.empty() ? TrainConfig{} : load_train_config(o.train_config);
  std::vector<LabeledVector> items;
  items.reserve(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto r = m.row(i);
    Eigen::VectorXd x(static_cast<Eigen::Index>(m.dim));
    for (std::size_t j = 0; j < m.dim; ++j) x(static_cast<Eigen::Index>(j)) = r[j];
    const auto tab = m.ids[i].find('\t');
    items.push_back({std::move(x), tab == std::string::npos ? m.ids[i] : m.ids[i].substr(0, tab)});
  }
  std::mt19937_64 rng(config.seed);
  std::shuffle(items.begin(), items.end(), rng);
  if (o.batch_size == 0) throw CLI::ValidationError("--batch-size", "must be positive");
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < items.size(); i += o.batch_size) {
    batches.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                         items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), i + o.batch_size)));
  }
  const std::size_t d_out = o.d_out == 0 ? m.dim : o.d_out;
  auto model = ProjectionModel::random(d_out, m.dim, o.init_noise, config.seed);
  const auto result = train(batches, std::move(model), config);
  save_projection(result.model, o.out + ".projection.json");
  save_loss_trace(result.loss_trace, o.out + ".loss.csv");
  out << "batches\t" << batches.size() << "\nepochs\t" << result.loss_trace.size();
  if (!result.loss_trace.empty()) out << "\nfinal_loss\t" << result.loss_trace.back();
  out << '\n';
}

void eval_cmd(const Options& o, std::ostream& out) {
  const auto corpus = require_corpus(o);
  const auto predictions = load_predictions(o.predictions);
  const auto gold = gold_labels(corpus);
  const auto kinds = mention_kinds(corpus);
  const auto report = to_json(evaluate(predictions, gold, &kinds));
  if (!o.out.empty()) io::write_atomic(o.out, report.dump(2) + "\n");
  out << report.dump(2) << '\n';
}

void analyze_errors(const Options& o, std::ostream& out) {
  const auto corpus = require_corpus(o);
  const auto kb = load_kb(o.kb, {o.cui_pattern});
  const auto predictions = load_predictions(o.predictions);
  auto report = analyze(corpus, predictions, kb);
  if (!o.labels.empty()) {
    std::map<std::string, std::string, std::less<>> labels;
    io::for_each_line(o.labels, [&](std::string_view line, std::size_t line_no) {
      if (line.empty()) return;
      const auto cols = io::split_tabs(line);
      if (cols.size() != 2) throw LoadError(o.labels, line_no, "expected mention_id<TAB>label");
      labels.emplace(std::string(cols[0]), std::string(cols[1]));
    });
    for (auto& r : report.records) {
      if (auto it = labels.find(r.mention_id); it != labels.end()) r.manual_label = it->second;
    }
  }
  json j = to_json(report);
  try {
    j["edit_distance_correct"] = edit_distance_profile(corpus, predictions, kb, true);
  } catch (const InvalidInput&) {
    j["edit_distance_correct"] = nullptr;
  }
  if (!o.csv.empty()) io::write_atomic(o.csv, error_records_csv(report.records));
  if (!o.out.empty()) io::write_atomic(o.out, j.dump(2) + "\n");
  out << j.dump(2) << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Concept normalization toolkit", "normkit"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--threads", o.threads, "Worker threads (0 = all cores)")->envname("NORMKIT_THREADS");

  std::function<void()> action;
  const CLI::App* leaf = nullptr;
  auto bind = [&](CLI::App* sub, void (*fn)(const Options&, std::ostream&)) {
    sub->fallthrough();
    sub->callback([&, sub, fn] {
      leaf = sub;
      action = [&, fn] { fn(o, out); };
    });
  };
  const std::vector<std::string> configs{"cls", "nospec", "all"};

  auto* kb = app.add_subcommand("kb", "Knowledge base tools")->require_subcommand(1);
  auto* kb_build_app = kb->add_subcommand("build", "Assemble a kb directory from tables");
  kb_build_app->add_option("--concepts", o.concepts, "CONC1 concept table")->required();
  kb_build_app->add_option("--types", o.types, "TYPE1 table");
  kb_build_app->add_option("--hierarchy", o.hierarchy, "HIER1 table");
  kb_build_app->add_option("--groups", o.groups, "GRP1 table");
  kb_build_app->add_option("--retired", o.retired, "Retired CUIs, one per line");
  kb_build_app->add_option("--cui-pattern", o.cui_pattern);
  kb_build_app->add_option("--out", o.out, "Output directory")->required();
  bind(kb_build_app, kb_build);

  auto* kb_merge_app = kb->add_subcommand("merge-lexicon", "Merge a lay lexicon into the kb");
  kb_merge_app->add_option("--kb", o.kb)->required();
  kb_merge_app->add_option("--lexicon", o.lexicon, "LEX1 file")->required();
  kb_merge_app->add_flag("--stem", o.stem, "Match headwords after stemming");
  kb_merge_app->add_option("--cui-pattern", o.cui_pattern);
  kb_merge_app->add_option("--out", o.out, "Output directory")->required();
  bind(kb_merge_app, kb_merge);

  auto* kb_stats_app = kb->add_subcommand("stats", "Names and concepts per source");
  kb_stats_app->add_option("--kb", o.kb)->required();
  kb_stats_app->add_option("--cui-pattern", o.cui_pattern);
  bind(kb_stats_app, kb_stats);

  auto* bpe = app.add_subcommand("bpe", "Subword tokenizer")->require_subcommand(1);
  auto* bpe_train_app = bpe->add_subcommand("train", "Learn BPE merges from kb names");
  bpe_train_app->add_option("--kb", o.kb)->required();
  bpe_train_app->add_option("--corpus", o.corpus, "Also learn from post texts");
  bpe_train_app->add_option("--merges", o.merges);
  bpe_train_app->add_option("--cui-pattern", o.cui_pattern);
  bpe_train_app->add_option("--out", o.out, "Output prefix")->required();
  bind(bpe_train_app, bpe_train);

  auto add_embedder = [&](CLI::App* sub) {
    sub->add_option("--bpe", o.bpe, "BPE prefix for the built-in embedder");
    sub->add_option("--dim", o.dim);
    sub->add_option("--seed", o.seed);
    sub->add_option("--config", o.config)->check(CLI::IsMember(configs));
  };
  auto add_context = [&](CLI::App* sub) {
    sub->add_option("--context", o.context)->check(CLI::IsMember({"none", "window", "sentence"}));
    sub->add_option("--window-tokens", o.window_tokens);
    sub->add_option("--max-sentence-tokens", o.max_sentence_tokens);
  };

  auto* embed = app.add_subcommand("embed", "Embedding matrices")->require_subcommand(1);
  auto* embed_index_app = embed->add_subcommand("index", "Embed every kb name");
  embed_index_app->add_option("--kb", o.kb);
  embed_index_app->add_option("--tokens", o.tokens, "Pool TOK1 records instead of embedding");
  embed_index_app->add_option("--cui-pattern", o.cui_pattern);
  add_embedder(embed_index_app);
  embed_index_app->add_option("--out", o.out, "EMB1 output")->required();
  bind(embed_index_app, embed_index_cmd);

  auto* embed_mentions_app = embed->add_subcommand("mentions", "Embed every corpus mention");
  embed_mentions_app->add_option("--corpus", o.corpus);
  embed_mentions_app->add_option("--tokens", o.tokens, "Pool TOK1 records instead of embedding");
  add_embedder(embed_mentions_app);
  add_context(embed_mentions_app);
  embed_mentions_app->add_option("--out", o.out, "EMB1 output")->required();
  bind(embed_mentions_app, embed_mentions_cmd);

  auto* link = app.add_subcommand("link", "Candidate generation")->require_subcommand(1);
  auto* link_string_app = link->add_subcommand("string", "Edit-distance linking");
  link_string_app->add_option("--kb", o.kb)->required();
  link_string_app->add_option("--corpus", o.corpus)->required();
  link_string_app->add_option("--k", o.k);
  link_string_app->add_flag("--similarity", o.similarity, "Score by 1 - normalized distance");
  link_string_app->add_flag("--no-stem", o.no_stem, "Compare unstemmed normalized terms");
  link_string_app->add_option("--cui-pattern", o.cui_pattern);
  link_string_app->add_option("--out", o.out, "PRED1 output")->required();
  bind(link_string_app, link_string_cmd);

  auto* link_embed_app = link->add_subcommand("embed", "Cosine linking");
  link_embed_app->add_option("--index", o.index, "EMB1 name index (else built from --kb)");
  link_embed_app->add_option("--embeddings", o.embeddings, "EMB1 mentions (else from --corpus)");
  link_embed_app->add_option("--kb", o.kb);
  link_embed_app->add_option("--corpus", o.corpus);
  link_embed_app->add_option("--tokens", o.tokens);
  link_embed_app->add_option("--cui-pattern", o.cui_pattern);
  add_embedder(link_embed_app);
  add_context(link_embed_app);
  link_embed_app->add_option("--k", o.k);
  link_embed_app->add_flag("--allow-mixed-config", o.allow_mixed_config);
  link_embed_app->add_option("--out", o.out, "PRED1 output")->required();
  bind(link_embed_app, link_embed_cmd);

  auto* rr = app.add_subcommand("rerank", "Re-ranking")->require_subcommand(1);
  auto* rr_build_app = rr->add_subcommand("build-data", "Cross-encoder training data");
  rr_build_app->add_option("--kb", o.kb)->required();
  rr_build_app->add_option("--corpus", o.corpus)->required();
  rr_build_app->add_option("--bpe", o.bpe, "Count tokens with this BPE model");
  rr_build_app->add_option("--negatives", o.negatives);
  rr_build_app->add_option("--max-sentence-tokens", o.max_sentence_tokens);
  rr_build_app->add_option("--split", o.split);
  rr_build_app->add_option("--seed", o.seed);
  rr_build_app->add_option("--cui-pattern", o.cui_pattern);
  rr_build_app->add_option("--out", o.out, "Output prefix")->required();
  bind(rr_build_app, rerank_build);

  auto* rr_apply_app = rr->add_subcommand("apply", "Re-rank predictions");
  rr_apply_app->add_option("--predictions", o.predictions)->required();
  rr_apply_app->add_option("--scores", o.scores, "External scores (JSON-lines)");
  rr_apply_app->add_option("--corpus", o.corpus);
  add_embedder(rr_apply_app);
  rr_apply_app->add_option("--max-sentence-tokens", o.max_sentence_tokens);
  rr_apply_app->add_option("--out", o.out, "PRED1 output")->required();
  bind(rr_apply_app, rerank_apply);

  auto* align = app.add_subcommand("align", "Self-alignment")->require_subcommand(1);
  auto* align_train_app = align->add_subcommand("train", "Train a linear projection");
  align_train_app->add_option("--embeddings", o.embeddings, "EMB1 with <label>\\t... ids")->required();
  align_train_app->add_option("--train-config", o.train_config, "JSON training config");
  align_train_app->add_option("--batch-size", o.batch_size);
  align_train_app->add_option("--d-out", o.d_out, "Projection rows (0 = input dim)");
  align_train_app->add_option("--init-noise", o.init_noise);
  align_train_app->add_option("--out", o.out, "Output prefix")->required();
  bind(align_train_app, align_train);

  auto* eval_app = app.add_subcommand("eval", "Accuracy@n and weighted P/R/F1");
  eval_app->add_option("--predictions", o.predictions)->required();
  eval_app->add_option("--corpus", o.corpus)->required();
  eval_app->add_option("--out", o.out, "JSON report");
  bind(eval_app, eval_cmd);

  auto* analyze_app = app.add_subcommand("analyze", "Error analysis")->require_subcommand(1);
  auto* errors_app = analyze_app->add_subcommand("errors", "Categorize wrong predictions");
  errors_app->add_option("--predictions", o.predictions)->required();
  errors_app->add_option("--corpus", o.corpus)->required();
  errors_app->add_option("--kb", o.kb)->required();
  errors_app->add_option("--cui-pattern", o.cui_pattern);
  errors_app->add_option("--csv", o.csv, "Error records for manual labelling");
  errors_app->add_option("--labels", o.labels, "mention_id<TAB>label file");
  errors_app->add_option("--out", o.out, "JSON report");
  bind(errors_app, analyze_errors);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }
  try {
    action();
    write_manifest(leaf, o.out);
  } catch (const CLI::ParseError& e) {
    err << "normkit: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "normkit: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "normkit: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace normkit
