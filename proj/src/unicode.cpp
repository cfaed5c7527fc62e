#include "normkit/unicode.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <stdexcept>

namespace normkit::unicode {

std::u32string decode(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto n = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < n) {
    UChar32 c;
    U8_NEXT(s, i, n, c);
    out.push_back(c < 0 ? U'\uFFFD' : static_cast<char32_t>(c));
  }
  return out;
}

std::string encode(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t c : cps) {
    uint8_t buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool error = false;
    U8_APPEND(buf, len, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
    if (error) {
      len = 0;
      U8_APPEND_UNSAFE(buf, len, 0xFFFD);
    }
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
  }
  return out;
}

std::size_t length(std::string_view utf8) {
  std::size_t count = 0;
  for (unsigned char c : utf8) {
    if ((c & 0xC0) != 0x80) ++count;
  }
  return count;
}

std::vector<std::size_t> byte_offsets(std::string_view utf8) {
  std::vector<std::size_t> offsets;
  offsets.reserve(utf8.size() + 1);
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto n = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < n) {
    offsets.push_back(static_cast<std::size_t>(i));
    U8_FWD_1(s, i, n);
  }
  offsets.push_back(utf8.size());
  return offsets;
}

std::string substr(std::string_view utf8, std::size_t start, std::size_t end) {
  const auto offsets = byte_offsets(utf8);
  const std::size_t count = offsets.size() - 1;
  if (start > end || end > count) {
    throw std::out_of_range("code-point range out of bounds");
  }
  return std::string(utf8.substr(offsets[start], offsets[end] - offsets[start]));
}

bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

bool is_punct(char32_t c) {
  const auto cp = static_cast<UChar32>(c);
  return u_ispunct(cp) || u_hasBinaryProperty(cp, UCHAR_PATTERN_SYNTAX);
}

bool is_upper(char32_t c) { return u_isupper(static_cast<UChar32>(c)); }

std::string nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU NFC normalizer unavailable");
  }
  const auto src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString dst = normalizer->normalize(src, status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU NFC normalization failed");
  }
  std::string out;
  dst.toUTF8String(out);
  return out;
}

std::string to_lower(std::string_view utf8) {
  auto s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  s.toLower(icu::Locale::getRoot());
  std::string out;
  s.toUTF8String(out);
  return out;
}

std::string trim(std::string_view utf8) {
  const auto cps = decode(utf8);
  std::size_t b = 0;
  std::size_t e = cps.size();
  while (b < e && is_space(cps[b])) ++b;
  while (e > b && is_space(cps[e - 1])) --e;
  return encode(std::u32string_view(cps).substr(b, e - b));
}

std::vector<std::string> split_whitespace(std::string_view utf8) {
  std::vector<std::string> out;
  std::u32string current;
  for (char32_t c : decode(utf8)) {
    if (is_space(c)) {
      if (!current.empty()) {
        out.push_back(encode(current));
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(encode(current));
  return out;
}

}  // namespace normkit::unicode
