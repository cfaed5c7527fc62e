#include "normkit/embed_linker.hpp"

#include "normkit/errors.hpp"
#include "normkit/io_util.hpp"
#include "normkit/parallel.hpp"
#include "normkit/unicode.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <tuple>

namespace normkit {

namespace {

double dot(const float* a, const float* b, std::size_t d) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    s0 += static_cast<double>(a[i]) * b[i];
    s1 += static_cast<double>(a[i + 1]) * b[i + 1];
    s2 += static_cast<double>(a[i + 2]) * b[i + 2];
    s3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  for (; i < d; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
double cosine_impl(std::span<const T> v, std::span<const T> w) {
  if (v.size() != w.size()) {
    throw InvalidInput("dimension mismatch: " + std::to_string(v.size()) + " vs " +
                       std::to_string(w.size()));
  }
  double vw = 0.0, vv = 0.0, ww = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = v[i];
    const double b = w[i];
    vw += a * b;
    vv += a * a;
    ww += b * b;
  }
  if (vv == 0.0 || ww == 0.0) throw InvalidInput("cosine similarity of a zero vector");
  return std::clamp(vw / (std::sqrt(vv) * std::sqrt(ww)), -1.0, 1.0);
}

}  // namespace

void EmbeddingMatrix::validate() const {
  if (dim == 0) throw InvalidInput("embedding dimension must be positive");
  if (data.size() != rows * dim) throw InvalidInput("embedding payload does not match n x d");
  if (ids.size() != rows) {
    throw InvalidInput("expected " + std::to_string(rows) + " ids, found " +
                       std::to_string(ids.size()));
  }
  for (float x : data) {
    if (!std::isfinite(x)) throw InvalidInput("non-finite embedding entry");
  }
}

void TokenEmbeddings::validate() const {
  if (dim == 0) throw InvalidInput("token embedding dimension must be positive");
  if (data.size() != tokens * dim || mask.size() != tokens) {
    throw InvalidInput("token embedding shape mismatch");
  }
  bool in_padding = false;
  for (std::size_t i = 0; i < tokens; ++i) {
    const auto kind = mask[i];
    if (static_cast<std::uint8_t>(kind) > 3) throw InvalidInput("unknown token mask code");
    if (kind == TokenKind::cls && i != 0) throw InvalidInput("[CLS] flag away from position 0");
    if (kind == TokenKind::pad) {
      in_padding = true;
    } else if (in_padding) {
      throw InvalidInput("padding must be a suffix");
    }
  }
}

std::string_view to_string(ExtractionConfig cfg) {
  switch (cfg) {
    case ExtractionConfig::cls:
      return "cls";
    case ExtractionConfig::nospec:
      return "nospec";
    case ExtractionConfig::all:
      return "all";
  }
  return "?";
}

ExtractionConfig parse_extraction_config(std::string_view text) {
  if (text == "cls") return ExtractionConfig::cls;
  if (text == "nospec") return ExtractionConfig::nospec;
  if (text == "all") return ExtractionConfig::all;
  throw InvalidInput("unknown extraction config '" + std::string(text) + "'");
}

double cosine_similarity(std::span<const float> v, std::span<const float> w) {
  return cosine_impl(v, w);
}

double cosine_similarity(std::span<const double> v, std::span<const double> w) {
  return cosine_impl(v, w);
}

std::vector<float> pool(const TokenEmbeddings& te, ExtractionConfig cfg) {
  te.validate();
  if (cfg == ExtractionConfig::cls) {
    if (te.tokens == 0 || te.mask[0] != TokenKind::cls) {
      throw InvalidInput("cls pooling needs a [CLS] token at position 0");
    }
    const auto r = te.row(0);
    return {r.begin(), r.end()};
  }
  std::vector<double> sum(te.dim, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < te.tokens; ++i) {
    const auto kind = te.mask[i];
    const bool include = cfg == ExtractionConfig::nospec ? kind == TokenKind::regular
                                                         : kind != TokenKind::pad;
    if (!include) continue;
    const auto r = te.row(i);
    for (std::size_t j = 0; j < te.dim; ++j) sum[j] += r[j];
    ++count;
  }
  if (count == 0) {
    throw InvalidInput("no token qualifies for '" + std::string(to_string(cfg)) + "' pooling");
  }
  std::vector<float> out(te.dim);
  for (std::size_t j = 0; j < te.dim; ++j) {
    out[j] = static_cast<float>(sum[j] / static_cast<double>(count));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in embedder

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

BuiltinEmbedder::BuiltinEmbedder(BpeTokenizer tokenizer, std::size_t dim, std::uint64_t seed)
    : tokenizer_(std::move(tokenizer)), dim_(dim), seed_(seed) {
  if (dim_ == 0) throw InvalidInput("embedding dimension must be positive");
  const std::size_t vocab = tokenizer_.model().vocab.size();
  table_.resize(vocab * dim_);
  std::mt19937_64 rng(seed_);
  std::uniform_real_distribution<float> uniform(-1.0f, 1.0f);
  for (auto& x : table_) x = uniform(rng);
}

std::vector<std::string> BuiltinEmbedder::trigrams(std::string_view token) {
  std::u32string padded = U"#";
  if (token.ends_with(kEndOfWord)) {
    padded += unicode::decode(token.substr(0, token.size() - kEndOfWord.size()));
    padded += U'$';
  } else {
    padded += unicode::decode(token);
  }
  padded += U'#';
  std::vector<std::string> out;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    out.push_back(unicode::encode(std::u32string_view(padded).substr(i, 3)));
  }
  return out;
}

std::vector<float> BuiltinEmbedder::trigram_vector(std::string_view token) const {
  std::vector<float> v(dim_, 0.0f);
  const auto grams = trigrams(token);
  if (grams.empty()) return v;
  // Scaled so the trigram part has about the norm of a table row.
  const float weight = static_cast<float>(std::sqrt(static_cast<double>(dim_) / 3.0 /
                                                    static_cast<double>(grams.size())));
  for (const auto& g : grams) {
    const std::uint64_t h = mix(fnv1a(g) ^ seed_);
    const std::size_t bucket = static_cast<std::size_t>(h % dim_);
    v[bucket] += ((h >> 32) & 1U) != 0U ? weight : -weight;
  }
  return v;
}

void BuiltinEmbedder::append_row(TokenEmbeddings& te, TokenId id, std::string_view token,
                                 TokenKind kind) const {
  const float* base = table_.data() + static_cast<std::size_t>(id) * dim_;
  const std::size_t offset = te.data.size();
  te.data.insert(te.data.end(), base, base + dim_);
  if (kind == TokenKind::regular) {
    const auto tri = trigram_vector(token);
    for (std::size_t j = 0; j < dim_; ++j) te.data[offset + j] += tri[j];
  }
  te.mask.push_back(kind);
  ++te.tokens;
}

TokenEmbeddings BuiltinEmbedder::embed(std::string_view text) const {
  const auto tokens = tokenizer_.tokenize(normalize(text));
  return embed_tokens(tokens);
}

TokenEmbeddings BuiltinEmbedder::embed_tokens(std::span<const std::string> tokens) const {
  TokenEmbeddings te;
  te.dim = dim_;
  te.data.reserve((tokens.size() + 2) * dim_);
  append_row(te, Vocabulary::kCls, "[CLS]", TokenKind::cls);
  // BPE output always carries end-of-word markers; anything else is a
  // sequence of plain words, each segmented on its own.
  const bool pieces = std::any_of(tokens.begin(), tokens.end(), [](const std::string& t) {
    return t.ends_with(kEndOfWord);
  });
  for (const auto& token : tokens) {
    if (auto id = tokenizer_.model().vocab.find(token);
        pieces && id && !Vocabulary::is_special(*id)) {
      append_row(te, *id, token, TokenKind::regular);
      continue;
    }
    for (const auto& piece : tokenizer_.tokenize(token)) {
      append_row(te, tokenizer_.id_of(piece), piece, TokenKind::regular);
    }
  }
  append_row(te, Vocabulary::kSep, "[SEP]", TokenKind::sep);
  return te;
}

// ---------------------------------------------------------------------------
// Index construction

std::vector<std::pair<std::string, std::string>> index_names(const KnowledgeBase& kb) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(kb.name_count());
  for (const auto& [cui, c] : kb.concepts()) {
    if (c.retired) continue;
    std::vector<std::string> surfaces;
    for (const auto& n : c.names) surfaces.push_back(n.surface);
    std::sort(surfaces.begin(), surfaces.end());
    surfaces.erase(std::unique(surfaces.begin(), surfaces.end()), surfaces.end());
    for (auto& s : surfaces) out.emplace_back(cui + '\t' + s, std::move(s));
  }
  return out;
}

EmbeddingMatrix build_embedding_index(std::span<const std::pair<std::string, std::string>> names,
                                      const Embedder& embedder, ExtractionConfig cfg,
                                      std::size_t threads) {
  EmbeddingMatrix m;
  m.rows = names.size();
  m.dim = embedder.dim();
  m.data.resize(m.rows * m.dim);
  m.ids.reserve(m.rows);
  for (const auto& [id, text] : names) m.ids.push_back(id);
  parallel_for(m.rows, threads, [&](std::size_t i) {
    const auto v = pool(embedder.embed(names[i].second), cfg);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  });
  return m;
}

EmbeddingMatrix build_embedding_index(const KnowledgeBase& kb, const Embedder& embedder,
                                      ExtractionConfig cfg, std::size_t threads) {
  const auto names = index_names(kb);
  return build_embedding_index(names, embedder, cfg, threads);
}

EmbeddingMatrix pool_records(std::span<const TokenEmbeddings> records,
                             std::vector<std::string> ids, ExtractionConfig cfg) {
  if (records.size() != ids.size()) {
    throw InvalidInput("expected " + std::to_string(records.size()) + " ids, found " +
                       std::to_string(ids.size()));
  }
  EmbeddingMatrix m;
  m.rows = records.size();
  m.dim = records.empty() ? 1 : records.front().dim;
  m.ids = std::move(ids);
  m.data.reserve(m.rows * m.dim);
  for (const auto& r : records) {
    if (r.dim != m.dim) throw InvalidInput("token records disagree on dimension");
    const auto v = pool(r, cfg);
    m.data.insert(m.data.end(), v.begin(), v.end());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Search

EmbeddingIndex::EmbeddingIndex(EmbeddingMatrix matrix) : matrix_(std::move(matrix)) {
  matrix_.validate();
  const std::size_t n = matrix_.rows;
  if (n > std::numeric_limits<std::uint32_t>::max()) throw InvalidInput("index too large");
  norms_.resize(n);
  cuis_.reserve(n);
  names_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = matrix_.row(i);
    norms_[i] = std::sqrt(dot(r.data(), r.data(), matrix_.dim));
    if (norms_[i] == 0.0) throw InvalidInput("index row " + std::to_string(i) + " is a zero vector");
    const std::string& id = matrix_.ids[i];
    const auto tab = id.find('\t');
    if (tab == std::string::npos) {
      throw InvalidInput("index id '" + id + "' is not of the form <cui>\\t<name>");
    }
    cuis_.push_back(id.substr(0, tab));
    names_.push_back(id.substr(tab + 1));
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return std::tie(cuis_[a], names_[a], a) < std::tie(cuis_[b], names_[b], b);
  });
  cui_rank_.resize(n);
  item_rank_.resize(n);
  item_row_ = order;
  std::uint32_t group = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && cuis_[order[i]] != cuis_[order[i - 1]]) ++group;
    cui_rank_[order[i]] = group;
    item_rank_[order[i]] = static_cast<std::uint32_t>(i);
  }
}

CandidateList EmbeddingIndex::link(std::span<const float> query, std::size_t k) const {
  EmbeddingMatrix q;
  q.rows = 1;
  q.dim = query.size();
  q.data.assign(query.begin(), query.end());
  q.ids = {""};
  return std::move(link_batch(q, k, 1).front());
}

std::vector<CandidateList> EmbeddingIndex::link_batch(const EmbeddingMatrix& queries,
                                                      std::size_t k, std::size_t threads) const {
  if (matrix_.rows == 0) throw InvalidInput("embedding index is empty");
  if (k == 0) throw InvalidInput("k must be at least 1");
  if (queries.dim != matrix_.dim) {
    throw InvalidInput("query dimension " + std::to_string(queries.dim) +
                       " does not match index dimension " + std::to_string(matrix_.dim));
  }
  const std::size_t d = matrix_.dim;
  std::vector<double> query_norms(queries.rows);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    const auto r = queries.row(q);
    query_norms[q] = std::sqrt(dot(r.data(), r.data(), d));
    if (query_norms[q] == 0.0 || !std::isfinite(query_norms[q])) {
      throw InvalidInput("query " + std::to_string(q) + " is a zero or non-finite vector");
    }
  }

  constexpr std::size_t kQueryBlock = 16;
  constexpr std::size_t kRowBlock = 512;
  std::vector<CandidateList> out(queries.rows);
  const std::size_t blocks = (queries.rows + kQueryBlock - 1) / kQueryBlock;
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t q0 = b * kQueryBlock;
    const std::size_t q1 = std::min(queries.rows, q0 + kQueryBlock);
    std::vector<DistinctTopK> tops(q1 - q0, DistinctTopK(k));
    for (std::size_t r0 = 0; r0 < matrix_.rows; r0 += kRowBlock) {
      const std::size_t r1 = std::min(matrix_.rows, r0 + kRowBlock);
      for (std::size_t q = q0; q < q1; ++q) {
        const float* qv = queries.data.data() + q * d;
        auto& top = tops[q - q0];
        for (std::size_t r = r0; r < r1; ++r) {
          const double cos =
              dot(qv, matrix_.data.data() + r * d, d) / (query_norms[q] * norms_[r]);
          const RankKey key{-cos, cui_rank_[r], item_rank_[r]};
          if (top.rejects(key)) continue;
          top.offer(key);
        }
      }
    }
    for (std::size_t q = q0; q < q1; ++q) {
      CandidateList list;
      for (const auto& key : tops[q - q0].sorted()) {
        const std::size_t row = item_row_[key.item];
        list.push_back({cuis_[row], names_[row], -key.cost, list.size() + 1});
      }
      out[q] = std::move(list);
    }
  });
  return out;
}

CandidateList link_embedding(const EmbeddingIndex& index, std::span<const float> query,
                             std::size_t k) {
  return index.link(query, k);
}

// ---------------------------------------------------------------------------
// Files

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

void put_floats(std::string& out, std::span<const float> values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  bool at_end() const { return pos_ == data_.size(); }

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::string_view(data_).substr(pos_, magic.size()) != magic) {
      throw DataError(path_ + ": bad magic, expected " + std::string(magic));
    }
    pos_ += magic.size();
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  void floats(std::vector<float>& out, std::size_t count) {
    if (count > (data_.size() - pos_) / 4) {
      throw DataError(path_ + ": truncated payload");
    }
    out.resize(count);
    for (auto& f : out) f = std::bit_cast<float>(u32());
  }

  std::string_view bytes(std::size_t count) {
    need(count);
    auto view = std::string_view(data_).substr(pos_, count);
    pos_ += count;
    return view;
  }

 private:
  void need(std::size_t count) const {
    if (data_.size() - pos_ < count) throw DataError(path_ + ": truncated payload");
  }

  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::vector<std::string> read_ids(const std::string& path) {
  std::vector<std::string> ids;
  io::for_each_line(path, [&](std::string_view line, std::size_t) { ids.emplace_back(line); });
  return ids;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (id.find('\n') != std::string::npos) throw InvalidInput("id contains a newline");
    out += id;
    out += '\n';
  }
  return out;
}

}  // namespace

void save_embeddings(const EmbeddingMatrix& m, const std::string& path) {
  m.validate();
  if (m.rows > 0xFFFFFFFFULL || m.dim > 0xFFFFFFFFULL) throw InvalidInput("matrix too large");
  std::string out = "EMB1";
  out.reserve(12 + m.data.size() * 4);
  put_u32(out, static_cast<std::uint32_t>(m.rows));
  put_u32(out, static_cast<std::uint32_t>(m.dim));
  put_floats(out, m.data);
  io::write_atomic(path + ".ids", join_ids(m.ids));
  io::write_atomic(path, out);
}

EmbeddingMatrix load_embeddings(const std::string& path) {
  Reader reader(io::read_file(path), path);
  reader.expect_magic("EMB1");
  EmbeddingMatrix m;
  m.rows = reader.u32();
  m.dim = reader.u32();
  if (m.dim == 0) throw DataError(path + ": dimension must be positive");
  reader.floats(m.data, m.rows * m.dim);
  if (!reader.at_end()) throw DataError(path + ": trailing bytes after payload");
  m.ids = read_ids(path + ".ids");
  if (m.ids.size() != m.rows) {
    throw DataError(path + ".ids: expected " + std::to_string(m.rows) + " ids, found " +
                    std::to_string(m.ids.size()));
  }
  try {
    m.validate();
  } catch (const InvalidInput& e) {
    throw DataError(path + ": " + e.what());
  }
  return m;
}

void save_token_records(std::span<const TokenEmbeddings> records, const std::string& path) {
  std::string out;
  for (const auto& r : records) {
    r.validate();
    out += "TOK1";
    put_u32(out, static_cast<std::uint32_t>(r.tokens));
    put_u32(out, static_cast<std::uint32_t>(r.dim));
    put_floats(out, r.data);
    for (auto kind : r.mask) out.push_back(static_cast<char>(kind));
  }
  io::write_atomic(path, out);
}

std::vector<TokenEmbeddings> load_token_records(const std::string& path) {
  Reader reader(io::read_file(path), path);
  std::vector<TokenEmbeddings> records;
  while (!reader.at_end()) {
    reader.expect_magic("TOK1");
    TokenEmbeddings te;
    te.tokens = reader.u32();
    te.dim = reader.u32();
    reader.floats(te.data, te.tokens * te.dim);
    for (char c : reader.bytes(te.tokens)) {
      const auto code = static_cast<std::uint8_t>(c);
      if (code > 3) throw DataError(path + ": unknown mask code " + std::to_string(code));
      te.mask.push_back(static_cast<TokenKind>(code));
    }
    try {
      te.validate();
    } catch (const InvalidInput& e) {
      throw DataError(path + ": record " + std::to_string(records.size()) + ": " + e.what());
    }
    records.push_back(std::move(te));
  }
  return records;
}

}  // namespace normkit
