#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace normkit {

enum class MentionKind { lay, technical };

std::string_view to_string(MentionKind kind);
MentionKind parse_mention_kind(std::string_view text);

// A span of a post. Offsets are code points, end exclusive; `surface` is the
// covered text and is filled in by the loader.
struct Mention {
  std::string id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;
  MentionKind kind = MentionKind::technical;
  std::optional<std::string> gold_cui;
  std::vector<std::string> synonyms;
};

struct Post {
  std::string id;
  std::string text;
  std::vector<Mention> mentions;
};

// Fills every mention's surface from the post text and checks span bounds.
// Throws InvalidInput on a bad span.
void attach_surfaces(Post& post);

// CORP1: JSON-lines, one post per line.
std::vector<Post> load_corpus(const std::string& path);
Post parse_post(std::string_view json_line);
std::string serialize_post(const Post& post);

}  // namespace normkit
