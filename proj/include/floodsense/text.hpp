#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/uscript.h>

#include "floodsense/error.hpp"

namespace floodsense::text {

/// How a term is located inside a text.
enum class MatchMode { token, substring };

inline std::string_view to_string(MatchMode m) {
  return m == MatchMode::token ? "token" : "substring";
}

inline std::u32string decode_utf8(std::string_view utf8) {
  const icu::UnicodeString us = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  std::u32string out;
  out.reserve(static_cast<std::size_t>(us.countChar32()));
  for (int32_t i = 0; i < us.length(); i = us.moveIndex32(i, 1))
    out.push_back(static_cast<char32_t>(us.char32At(i)));
  return out;
}

inline std::string to_utf8(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t c : cps) {
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else if (c < 0x800) {
      out += static_cast<char>(0xC0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
      out += static_cast<char>(0xE0 | (c >> 12));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (c >> 18));
      out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    }
  }
  return out;
}

/// NFC, then full Unicode case folding, then NFC again (folding can produce
/// non-composed sequences). Invalid UTF-8 bytes become U+FFFD.
inline std::u32string normalize(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("lexicon", "ICU NFC normalizer unavailable");
  icu::UnicodeString us = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString composed = nfc->normalize(us, status);
  composed.foldCase(U_FOLD_CASE_DEFAULT);
  icu::UnicodeString result = nfc->normalize(composed, status);
  if (U_FAILURE(status)) throw Error("lexicon", "ICU normalization failed");
  std::u32string out;
  out.reserve(static_cast<std::size_t>(result.length()));
  for (int32_t i = 0; i < result.length(); i = result.moveIndex32(i, 1))
    out.push_back(static_cast<char32_t>(result.char32At(i)));
  return out;
}

inline std::string normalize_utf8(std::string_view utf8) { return to_utf8(normalize(utf8)); }

/// Letters, combining marks, digits, and the zero-width joiners that occur
/// inside Indic words.
inline bool is_word_char(char32_t c) {
  if (c == 0x200C || c == 0x200D) return true;
  const auto mask = U_GET_GC_MASK(static_cast<UChar32>(c));
  return (mask & (U_GC_L_MASK | U_GC_M_MASK | U_GC_N_MASK)) != 0;
}

/// True for scripts written without spaces between words.
inline bool lacks_word_spaces(char32_t c) {
  UErrorCode status = U_ZERO_ERROR;
  switch (uscript_getScript(static_cast<UChar32>(c), &status)) {
    case USCRIPT_THAI:
    case USCRIPT_LAO:
    case USCRIPT_KHMER:
    case USCRIPT_MYANMAR:
    case USCRIPT_HAN:
    case USCRIPT_HIRAGANA:
    case USCRIPT_KATAKANA:
    case USCRIPT_TIBETAN:
      return true;
    default:
      return false;
  }
}

inline bool has_unspaced_script(std::u32string_view s) {
  for (char32_t c : s)
    if (lacks_word_spaces(c)) return true;
  return false;
}

/// Token over a normalized codepoint string; [begin, end) are codepoint offsets.
struct Token {
  std::u32string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Maximal runs of word characters. Everything else separates tokens.
inline std::vector<Token> tokenize(std::u32string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_word_char(s[i])) ++i;
    if (i >= s.size()) break;
    const std::size_t b = i;
    while (i < s.size() && is_word_char(s[i])) ++i;
    out.push_back(Token{std::u32string(s.substr(b, i - b)), b, i});
  }
  return out;
}

inline std::vector<std::u32string> token_texts(std::u32string_view s) {
  std::vector<std::u32string> out;
  for (auto& t : tokenize(s)) out.push_back(std::move(t.text));
  return out;
}

/// Non-overlapping occurrences of `needle` in `hay`, scanning left to right.
inline std::size_t count_substring(std::u32string_view hay, std::u32string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::u32string_view::npos;
       pos = hay.find(needle, pos + needle.size()))
    ++n;
  return n;
}

/// Occurrences of the token sequence `phrase` as consecutive whole tokens.
inline std::size_t count_token_phrase(const std::vector<std::u32string>& tokens,
                                      const std::vector<std::u32string>& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < phrase.size() && ok; ++j) ok = tokens[i + j] == phrase[j];
    if (ok) ++n;
  }
  return n;
}

}  // namespace floodsense::text
