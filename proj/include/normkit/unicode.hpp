#pragma once

#include <string>
#include <string_view>
#include <vector>

// Code-point level helpers. All offsets handed around by the toolkit are
// Unicode code-point offsets; these functions convert between UTF-8 bytes
// and code points.
namespace normkit::unicode {

// Decodes UTF-8. Ill-formed sequences decode to U+FFFD.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view cps);

std::size_t length(std::string_view utf8);

// Byte offset of every code point, plus a final entry equal to utf8.size().
std::vector<std::size_t> byte_offsets(std::string_view utf8);

// Code-point substring [start, end).
std::string substr(std::string_view utf8, std::size_t start, std::size_t end);

bool is_space(char32_t c);
bool is_punct(char32_t c);
bool is_upper(char32_t c);

// NFC composition and full Unicode lowercasing (root locale).
std::string nfc(std::string_view utf8);
std::string to_lower(std::string_view utf8);

std::string trim(std::string_view utf8);

// Splits on runs of Unicode whitespace; never yields empty pieces.
std::vector<std::string> split_whitespace(std::string_view utf8);

}  // namespace normkit::unicode
