#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <unicode/uchar.h>

#include "floodsense/corpus.hpp"
#include "floodsense/csv.hpp"
#include "floodsense/error.hpp"
#include "floodsense/lexicon.hpp"
#include "floodsense/parallel.hpp"
#include "floodsense/text.hpp"

namespace floodsense {

struct KeywordCount {
  std::string term;
  std::size_t frequency = 0;
};

using Stopwords = std::set<std::string>;

/// One word per line, '#' starts a comment. Words are normalized on load.
inline Stopwords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("expand", "cannot read stopword list '" + path.string() + "'");
  Stopwords out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (const auto& t : text::token_texts(text::normalize(line))) out.insert(text::to_utf8(t));
  }
  return out;
}

namespace detail {

inline bool starts_with(std::u32string_view s, std::u32string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

/// Word tokens of a post after removing URLs and @handles and stripping
/// hashtag markers.
inline std::vector<std::u32string> content_tokens(std::string_view utf8) {
  const std::u32string norm = text::normalize(utf8);
  std::vector<std::u32string> out;
  std::size_t i = 0;
  while (i < norm.size()) {
    while (i < norm.size() && u_isUWhiteSpace(static_cast<UChar32>(norm[i]))) ++i;
    const std::size_t b = i;
    while (i < norm.size() && !u_isUWhiteSpace(static_cast<UChar32>(norm[i]))) ++i;
    if (b == i) break;
    std::u32string_view chunk(norm.data() + b, i - b);
    if (starts_with(chunk, U"http://") || starts_with(chunk, U"https://") || starts_with(chunk, U"www.") ||
        starts_with(chunk, U"@"))
      continue;
    while (!chunk.empty() && chunk.front() == U'#') chunk.remove_prefix(1);
    for (auto& t : text::token_texts(chunk)) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace detail

/// Most frequent content words of the relevant posts that are not already
/// seed terms, stopwords, or shorter than two codepoints. Ties go to the
/// lexicographically smaller term.
inline std::vector<KeywordCount> extract_keywords(std::span<const std::string> relevant_texts, const Dictionary& seed,
                                                  std::size_t k, const Stopwords& stopwords) {
  if (k == 0) return {};
  std::set<std::u32string> excluded;
  for (const auto& t : seed.terms) {
    const auto norm = text::normalize(t);
    excluded.insert(norm);
    for (auto& tok : text::token_texts(norm)) excluded.insert(std::move(tok));
  }
  std::map<std::string, std::size_t> freq;
  for (const auto& txt : relevant_texts)
    for (const auto& tok : detail::content_tokens(txt)) {
      if (tok.size() < 2 || excluded.count(tok)) continue;
      auto utf8 = text::to_utf8(tok);
      if (stopwords.count(utf8)) continue;
      ++freq[utf8];
    }
  std::vector<KeywordCount> all;
  for (auto& [term, n] : freq) all.push_back({term, n});
  std::stable_sort(all.begin(), all.end(),
                   [](const KeywordCount& a, const KeywordCount& b) { return a.frequency > b.frequency; });
  if (all.size() > k) all.resize(k);
  return all;
}

inline std::vector<std::string> keyword_terms(std::span<const KeywordCount> kws) {
  std::vector<std::string> out;
  for (const auto& k : kws) out.push_back(k.term);
  return out;
}

enum class IdfVariant { smooth, plain };
enum class Scorer { tfidf, cosine };

struct ScoringConfig {
  IdfVariant idf = IdfVariant::smooth;
  Scorer scorer = Scorer::tfidf;
  unsigned threads = 1;
};

/// smooth: ln(N / (1 + df)) + 1, always positive.  plain: ln(N / df), 0 when df == 0.
inline double idf(std::size_t n_docs, std::size_t df, IdfVariant v = IdfVariant::smooth) {
  const double n = static_cast<double>(n_docs);
  if (v == IdfVariant::smooth) return std::log(n / (1.0 + static_cast<double>(df))) + 1.0;
  return df == 0 ? 0.0 : std::log(n / static_cast<double>(df));
}

struct TermStats {
  std::string term;
  std::size_t tf_relevant = 0;
  std::size_t df_corpus = 0;
};

struct ScoredPost {
  std::string post_id;
  double score = 0;
  bool promising = false;
};

struct ScoringResult {
  std::vector<ScoredPost> scored;  // aligned with the corpus
  std::vector<TermStats> terms;    // df per query term
};

/// Cumulative TF-IDF of each post over the query terms (tf = raw occurrence
/// count). The cosine scorer instead compares the post's TF-IDF vector with
/// the query's IDF vector.
inline ScoringResult score_posts(std::span<const Post> corpus, const Query& query, const ScoringConfig& cfg = {}) {
  if (corpus.empty()) throw Error("expand", "cannot score an empty corpus");
  const auto& terms = query.terms();
  const std::size_t nq = terms.size();
  auto tf = parallel_map<std::vector<std::size_t>>(corpus.size(), cfg.threads, [&](std::size_t i) {
    const NormalizedText nt(corpus[i].text);
    std::vector<std::size_t> row(nq);
    for (std::size_t q = 0; q < nq; ++q) row[q] = Query::term_frequency(terms[q], nt);
    return row;
  });

  ScoringResult out;
  std::vector<double> weights(nq);
  for (std::size_t q = 0; q < nq; ++q) {
    std::size_t df = 0;
    for (const auto& row : tf) df += row[q] > 0;
    out.terms.push_back({terms[q].utf8(), 0, df});
    weights[q] = idf(corpus.size(), df, cfg.idf);
  }
  double query_norm = 0;
  for (double w : weights) query_norm += w * w;
  query_norm = std::sqrt(query_norm);

  out.scored.resize(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    double dot = 0, norm = 0;
    for (std::size_t q = 0; q < nq; ++q) {
      const double v = static_cast<double>(tf[i][q]) * weights[q];
      dot += v * weights[q];
      norm += v * v;
    }
    double s = 0;
    if (cfg.scorer == Scorer::tfidf) {
      for (std::size_t q = 0; q < nq; ++q) s += static_cast<double>(tf[i][q]) * weights[q];
    } else if (norm > 0 && query_norm > 0) {
      s = dot / (std::sqrt(norm) * query_norm);
    }
    out.scored[i] = {corpus[i].id, std::max(0.0, s), false};
  }
  return out;
}

/// Number of top posts guaranteed to be promising: ceil((1 - p) * N).
inline std::size_t promising_floor(std::size_t n, double p) {
  const double raw = (1.0 - p) * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

/// Nearest-rank cutoff: the score of the ceil((1 - p) * N)-th best post.
inline double promising_cutoff(std::span<const ScoredPost> scored, double p) {
  if (!(p > 0 && p < 1)) throw Error("expand", "percentile must be in (0, 1)");
  if (scored.empty()) return 0;
  std::vector<double> s;
  for (const auto& x : scored) s.push_back(x.score);
  const std::size_t k = std::max<std::size_t>(1, promising_floor(s.size(), p));
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k - 1), s.end(), std::greater<>());
  return s[k - 1];
}

/// Sets `promising` on every post scoring at least the cutoff.
inline std::vector<ScoredPost> mark_promising(std::span<const ScoredPost> scored, double p) {
  const double cutoff = promising_cutoff(scored, p);
  std::vector<ScoredPost> out(scored.begin(), scored.end());
  for (auto& s : out) s.promising = s.score >= cutoff;
  return out;
}

/// Promising posts only, best first; equal scores ordered by post id.
inline std::vector<ScoredPost> select_promising(std::span<const ScoredPost> scored, double p) {
  auto marked = mark_promising(scored, p);
  std::erase_if(marked, [](const ScoredPost& s) { return !s.promising; });
  std::sort(marked.begin(), marked.end(), [](const ScoredPost& a, const ScoredPost& b) {
    return a.score != b.score ? a.score > b.score : a.post_id < b.post_id;
  });
  return marked;
}

/// CSV: post_id,score,promising
inline void write_scored_csv(std::ostream& os, std::span<const ScoredPost> scored) {
  os << "post_id,score,promising\n";
  for (const auto& s : scored) csv::write_row(os, {s.post_id, format_number(s.score), s.promising ? "1" : "0"});
}

inline void write_keyword_report(std::ostream& os, std::span<const KeywordCount> kws) {
  os << "# new keywords (term, frequency in relevant posts)\n";
  for (const auto& k : kws) os << k.term << '\t' << k.frequency << '\n';
}

}  // namespace floodsense
