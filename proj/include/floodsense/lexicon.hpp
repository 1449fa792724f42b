#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "floodsense/corpus.hpp"
#include "floodsense/error.hpp"
#include "floodsense/text.hpp"

namespace floodsense {

using text::MatchMode;

/// Seed keywords for one language and event type. Terms are stored
/// normalized (NFC + case fold) and unique.
struct Dictionary {
  std::string lang;
  std::string event_type;
  std::vector<std::string> terms;
  MatchMode match_mode = MatchMode::token;
};

/// Substring matching for scripts without word spaces, token matching otherwise.
inline MatchMode default_match_mode(std::span<const std::string> terms) {
  for (const auto& t : terms)
    if (text::has_unspaced_script(text::decode_utf8(t))) return MatchMode::substring;
  return MatchMode::token;
}

inline std::optional<MatchMode> parse_match_mode(std::string_view s) {
  if (s == "token") return MatchMode::token;
  if (s == "substring") return MatchMode::substring;
  return std::nullopt;
}

/// Normalizes and deduplicates `raw_terms`. Throws if nothing survives.
inline Dictionary make_dictionary(std::string lang, std::string event_type, std::span<const std::string> raw_terms,
                                  std::optional<MatchMode> mode = std::nullopt) {
  Dictionary d{std::move(lang), std::move(event_type), {}, MatchMode::token};
  for (const auto& raw : raw_terms) {
    const auto norm = text::normalize(raw);
    if (text::tokenize(norm).empty()) {
      warn("lexicon", "dropping term '" + raw + "' with no word characters");
      continue;
    }
    auto utf8 = text::to_utf8(norm);
    if (std::find(d.terms.begin(), d.terms.end(), utf8) != d.terms.end()) {
      warn("lexicon", "duplicate term '" + raw + "' after normalization");
      continue;
    }
    d.terms.push_back(std::move(utf8));
  }
  if (d.terms.empty()) throw Error("lexicon", "dictionary '" + d.lang + "/" + d.event_type + "' has no terms");
  d.match_mode = mode.value_or(default_match_mode(d.terms));
  return d;
}

/// Reads a JSON dictionary: {"lang", "event_type", "match_mode"?, "terms": [...]}.
inline Dictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("lexicon", "cannot read dictionary '" + path.string() + "'");
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("lexicon", "'" + path.string() + "' is not a JSON object");
  auto str = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw Error("lexicon", path.string() + ": missing '" + key + "'");
    return it->get<std::string>();
  };
  std::string lang = str("lang");
  std::string event = str("event_type");
  auto terms = j.find("terms");
  if (terms == j.end() || !terms->is_array()) throw Error("lexicon", path.string() + ": missing 'terms' list");
  std::vector<std::string> raw;
  for (const auto& t : *terms) {
    if (!t.is_string()) throw Error("lexicon", path.string() + ": terms must be strings");
    raw.push_back(t.get<std::string>());
  }
  std::optional<MatchMode> mode;
  if (auto it = j.find("match_mode"); it != j.end() && !it->is_null()) {
    mode = it->is_string() ? parse_match_mode(it->get<std::string>()) : std::nullopt;
    if (!mode) throw Error("lexicon", path.string() + ": match_mode must be 'token' or 'substring'");
  }
  return make_dictionary(std::move(lang), std::move(event), raw, mode);
}

struct QueryTerm {
  std::u32string text;                // normalized
  std::vector<std::u32string> tokens;  // for token mode
  MatchMode mode = MatchMode::token;

  std::string utf8() const { return text::to_utf8(text); }
};

/// Post text prepared once for repeated matching.
struct NormalizedText {
  std::u32string codepoints;
  std::vector<std::u32string> tokens;

  explicit NormalizedText(std::string_view utf8)
      : codepoints(text::normalize(utf8)), tokens(text::token_texts(codepoints)) {}
};

/// Logical OR of its terms.
class Query {
 public:
  Query() = default;

  void add(std::string_view term, MatchMode mode) {
    QueryTerm t;
    t.text = text::normalize(term);
    t.tokens = text::token_texts(t.text);
    t.mode = mode;
    if (t.tokens.empty()) return;
    for (const auto& existing : terms_)
      if (existing.text == t.text && existing.mode == t.mode) return;
    terms_.push_back(std::move(t));
  }

  const std::vector<QueryTerm>& terms() const noexcept { return terms_; }
  bool empty() const noexcept { return terms_.empty(); }
  std::size_t size() const noexcept { return terms_.size(); }

  static bool term_matches(const QueryTerm& t, const NormalizedText& nt) {
    if (t.mode == MatchMode::substring) return nt.codepoints.find(t.text) != std::u32string::npos;
    return text::count_token_phrase(nt.tokens, t.tokens) > 0;
  }

  /// Raw occurrence count of one term.
  static std::size_t term_frequency(const QueryTerm& t, const NormalizedText& nt) {
    if (t.mode == MatchMode::substring) return text::count_substring(nt.codepoints, t.text);
    return text::count_token_phrase(nt.tokens, t.tokens);
  }

  bool matches(const NormalizedText& nt) const {
    return std::any_of(terms_.begin(), terms_.end(), [&](const QueryTerm& t) { return term_matches(t, nt); });
  }

  bool matches(std::string_view utf8) const { return matches(NormalizedText(utf8)); }

 private:
  std::vector<QueryTerm> terms_;
};

inline Query build_query(const Dictionary& dict) {
  Query q;
  for (const auto& t : dict.terms) q.add(t, dict.match_mode);
  return q;
}

/// Seed terms plus extra keywords; each extra term gets the mode its script implies.
inline Query build_query(const Dictionary& dict, std::span<const std::string> extra_terms) {
  Query q = build_query(dict);
  for (const auto& t : extra_terms) {
    const std::string one[] = {t};
    q.add(t, default_match_mode(one));
  }
  return q;
}

/// OR across several dictionaries (one per language).
inline Query build_query(std::span<const Dictionary> dicts) {
  Query q;
  for (const auto& d : dicts)
    for (const auto& t : d.terms) q.add(t, d.match_mode);
  return q;
}

inline bool match_post(const Query& query, const Post& post) { return query.matches(post.text); }

}  // namespace floodsense
