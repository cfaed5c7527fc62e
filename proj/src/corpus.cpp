#include "normkit/corpus.hpp"

#include "normkit/errors.hpp"
#include "normkit/unicode.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace normkit {

using nlohmann::json;

std::string_view to_string(MentionKind kind) {
  return kind == MentionKind::lay ? "lay" : "technical";
}

MentionKind parse_mention_kind(std::string_view text) {
  if (text == "lay") return MentionKind::lay;
  if (text == "technical") return MentionKind::technical;
  throw InvalidInput("unknown mention kind '" + std::string(text) + "'");
}

void attach_surfaces(Post& post) {
  const auto offsets = unicode::byte_offsets(post.text);
  const std::size_t length = offsets.size() - 1;
  for (auto& m : post.mentions) {
    if (m.start >= m.end || m.end > length) {
      throw InvalidInput("mention '" + m.id + "' of post '" + post.id + "' has span [" +
                         std::to_string(m.start) + ", " + std::to_string(m.end) +
                         ") outside text of length " + std::to_string(length));
    }
    m.surface = post.text.substr(offsets[m.start], offsets[m.end] - offsets[m.start]);
  }
}

Post parse_post(std::string_view json_line) {
  const json j = json::parse(json_line);
  Post post;
  post.id = j.at("id").get<std::string>();
  post.text = j.at("text").get<std::string>();
  for (const auto& jm : j.value("mentions", json::array())) {
    Mention m;
    m.id = jm.at("id").get<std::string>();
    m.start = jm.at("start").get<std::size_t>();
    m.end = jm.at("end").get<std::size_t>();
    m.kind = parse_mention_kind(jm.value("kind", std::string("technical")));
    if (jm.contains("gold_cui") && !jm.at("gold_cui").is_null()) {
      m.gold_cui = jm.at("gold_cui").get<std::string>();
    }
    m.synonyms = jm.value("synonyms", std::vector<std::string>{});
    post.mentions.push_back(std::move(m));
  }
  attach_surfaces(post);
  return post;
}

std::string serialize_post(const Post& post) {
  json mentions = json::array();
  for (const auto& m : post.mentions) {
    mentions.push_back({{"id", m.id},
                        {"start", m.start},
                        {"end", m.end},
                        {"kind", to_string(m.kind)},
                        {"gold_cui", m.gold_cui ? json(*m.gold_cui) : json(nullptr)},
                        {"synonyms", m.synonyms}});
  }
  return json{{"id", post.id}, {"text", post.text}, {"mentions", mentions}}.dump();
}

std::vector<Post> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus '" + path + "'");
  std::vector<Post> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      posts.push_back(parse_post(line));
    } catch (const json::exception& e) {
      throw LoadError(path, line_no, e.what());
    } catch (const InvalidInput& e) {
      throw LoadError(path, line_no, e.what());
    }
  }
  return posts;
}

}  // namespace normkit
