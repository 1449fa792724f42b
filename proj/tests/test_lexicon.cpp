#include <gtest/gtest.h>

#include <cctype>

#include "floodsense/lexicon.hpp"
#include "floodsense/phrase_trie.hpp"
#include "floodsense/testing/synthetic.hpp"
#include "test_support.hpp"

using namespace floodsense;
namespace fx = floodsense::testing;
using floodsense::test::TempDir;
using floodsense::test::WarningCapture;

namespace {

Dictionary dict(std::vector<std::string> terms, std::optional<MatchMode> mode = std::nullopt) {
  return make_dictionary("en", "flood", terms, mode);
}

Post post(std::string text) {
  Post p;
  p.id = "x";
  p.text = std::move(text);
  return p;
}

// Oracle: ASCII-lowercased text split on ASCII non-alphanumerics; bytes >= 0x80
// count as word characters. Valid for the synthetic vocabulary, which has no
// non-ASCII punctuation and no non-ASCII case pairs.
std::vector<std::string> oracle_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (c >= 0x80 || std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool oracle_match(const std::vector<std::pair<std::string, MatchMode>>& terms, const std::string& text) {
  std::string lower;
  for (unsigned char c : text) lower += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
  const auto toks = oracle_tokens(text);
  for (const auto& [t, mode] : terms) {
    if (mode == MatchMode::substring) {
      if (lower.find(t) != std::string::npos) return true;
    } else if (std::find(toks.begin(), toks.end(), t) != toks.end()) {
      return true;
    }
  }
  return false;
}

}  // namespace

TEST(Normalize, NfcAndFullCaseFold) {
  EXPECT_EQ(text::normalize_utf8("FLOOD"), "flood");
  EXPECT_EQ(text::normalize_utf8("cafe\xCC\x81"), "caf\xC3\xA9");  // e + combining acute -> é
  EXPECT_EQ(text::normalize_utf8("Straße"), "strasse");           // full fold, not simple
  EXPECT_EQ(text::normalize_utf8("ΣΊΣΥΦΟΣ"), text::normalize_utf8("σίσυφος"));
  EXPECT_EQ(text::normalize_utf8("น้ำท่วม"), "น้ำท่วม");
}

TEST(Tokenize, SplitsOnPunctuationKeepsMarks) {
  const auto toks = text::token_texts(text::normalize("Flood, in the city! बाढी-पानी #flood"));
  const std::vector<std::u32string> want = {U"flood", U"in", U"the", U"city", U"बाढी", U"पानी", U"flood"};
  EXPECT_EQ(toks, want);
}

TEST(Script, ThaiLacksWordSpaces) {
  EXPECT_TRUE(text::has_unspaced_script(text::decode_utf8("น้ำท่วม")));
  EXPECT_FALSE(text::has_unspaced_script(text::decode_utf8("बाढी")));
  EXPECT_FALSE(text::has_unspaced_script(text::decode_utf8("flood")));
}

TEST(PhraseTrie, LongestMatchAndVeto) {
  PhraseTrie<char32_t> trie;
  trie.insert(std::u32string(U"ab"), 1);
  trie.insert(std::u32string(U"abcd"), 2);
  const std::u32string s = U"xabcde";
  auto m = trie.longest_at(s, 1);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->length, 4u);
  EXPECT_EQ(m->payloads->front(), 2u);
  m = trie.longest_at(s, 1, [](std::size_t len) { return len != 4; });
  ASSERT_TRUE(m);
  EXPECT_EQ(m->length, 2u);
  EXPECT_FALSE(trie.longest_at(s, 0));
}

TEST(Dictionary, EnglishTokenMode) {
  const auto d = dict({"flood", "flooding"});
  EXPECT_EQ(d.match_mode, MatchMode::token);
  EXPECT_EQ(d.terms.size(), 2u);
}

TEST(Dictionary, CaseFoldDuplicatesCollapseWithWarning) {
  WarningCapture w;
  const auto d = dict({"flood", "FLOOD"});
  EXPECT_EQ(d.terms, std::vector<std::string>{"flood"});
  EXPECT_EQ(w.messages.size(), 1u);
}

TEST(Dictionary, EmptyIsFatal) {
  WarningCapture w;
  EXPECT_THROW(dict({}), Error);
  EXPECT_THROW(dict({"  ", "!!"}), Error);
}

TEST(Dictionary, ThaiFileDefaultsToSubstring) {
  TempDir dir("dict");
  test::write_text(dir / "th.json", R"({"lang":"th","event_type":"flood","terms":["น้ำท่วม","อุทกภัย","น้ำป่า"]})");
  const auto d = load_dictionary(dir / "th.json");
  EXPECT_EQ(d.match_mode, MatchMode::substring);
  EXPECT_EQ(d.terms.size(), 3u);
  EXPECT_EQ(d.lang, "th");
}

TEST(Dictionary, NepaliUsesTokenModeAndOverrideHonoured) {
  TempDir dir("dict");
  test::write_text(dir / "ne.json", R"({"lang":"ne","event_type":"flood","terms":["बाढी","पहिरो"]})");
  EXPECT_EQ(load_dictionary(dir / "ne.json").match_mode, MatchMode::token);
  test::write_text(dir / "en.json", R"({"lang":"en","event_type":"flood","match_mode":"substring","terms":["flood"]})");
  EXPECT_EQ(load_dictionary(dir / "en.json").match_mode, MatchMode::substring);
  test::write_text(dir / "bad.json", R"({"lang":"en","event_type":"flood","match_mode":"regex","terms":["flood"]})");
  EXPECT_THROW(load_dictionary(dir / "bad.json"), Error);
  test::write_text(dir / "empty.json", R"({"lang":"en","event_type":"flood","terms":[]})");
  EXPECT_THROW(load_dictionary(dir / "empty.json"), Error);
  EXPECT_THROW(load_dictionary(dir / "missing.json"), Error);
}

TEST(BuildQuery, SingleTermAndOr) {
  const auto q1 = build_query(dict({"Flood"}));
  ASSERT_EQ(q1.size(), 1u);
  EXPECT_EQ(q1.terms()[0].utf8(), "flood");
  const auto q3 = build_query(dict({"flood", "inundation", "deluge"}));
  EXPECT_TRUE(match_post(q3, post("a deluge today")));
  EXPECT_TRUE(match_post(q3, post("INUNDATION")));
  EXPECT_FALSE(match_post(q3, post("sunny")));
}

TEST(BuildQuery, SeedUnionExpandedTerms) {
  const auto d = dict({"flood", "flooding"});
  const std::vector<std::string> extra = {"water", "house", "flood", "น้ำ"};
  const auto q = build_query(d, extra);
  // Set-union oracle over normalized terms.
  std::set<std::string> oracle(d.terms.begin(), d.terms.end());
  for (const auto& t : extra) oracle.insert(text::normalize_utf8(t));
  EXPECT_EQ(q.size(), oracle.size());
  EXPECT_EQ(q.terms().back().mode, MatchMode::substring);
}

TEST(MatchPost, SpecExamples) {
  const auto token = build_query(dict({"flood"}));
  const auto substring = build_query(dict({"flood"}, MatchMode::substring));
  EXPECT_TRUE(match_post(token, post("Flood in the city")));
  EXPECT_FALSE(match_post(token, post("floodlights")));
  EXPECT_TRUE(match_post(substring, post("floodlights")));
}

TEST(MatchPost, MultiWordTermNeedsConsecutiveTokens) {
  const auto q = build_query(dict({"flash flood"}));
  EXPECT_TRUE(match_post(q, post("A FLASH-flood warning")));
  EXPECT_FALSE(match_post(q, post("flash of a flood")));
}

TEST(MatchPost, ThaiSubstring) {
  const Dictionary th = make_dictionary("th", "flood", std::vector<std::string>{"น้ำท่วม"});
  EXPECT_TRUE(match_post(build_query(th), post("น้ำท่วมหนักที่กรุงเทพมหานคร")));
  EXPECT_FALSE(match_post(build_query(th), post("ฝนตกหนัก")));
}

TEST(MatchPost, RandomizedAgainstBruteForceScan) {
  fx::Rng rng(21);
  const auto posts = fx::random_posts(rng, {.count = 2000});
  const std::vector<std::vector<std::pair<std::string, MatchMode>>> queries = {
      {{"flood", MatchMode::token}},
      {{"flood", MatchMode::substring}},
      {{"water", MatchMode::token}, {"house", MatchMode::token}},
      {{"น้ำท่วม", MatchMode::substring}, {"ฝนตก", MatchMode::substring}},
      {{"बाढी", MatchMode::token}, {"rising", MatchMode::token}},
  };
  for (const auto& spec : queries) {
    Query q;
    for (const auto& [t, m] : spec) q.add(t, m);
    std::size_t got = 0, want = 0;
    for (const auto& p : posts) {
      const bool m = match_post(q, p);
      ASSERT_EQ(m, oracle_match(spec, p.text)) << p.text;
      got += m;
      want += oracle_match(spec, p.text);
    }
    EXPECT_EQ(got, want);
  }
}

TEST(MatchPost, InvariantUnderNfcRenormalization) {
  const auto q = build_query(dict({"café"}));
  EXPECT_TRUE(match_post(q, post("Cafe\xCC\x81 flooded")));
  EXPECT_TRUE(match_post(q, post("CAF\xC3\x89 flooded")));
  fx::Rng rng(22);
  const auto fl = build_query(dict({"flood", "น้ำท่วม", "बाढी"}));
  for (const auto& p : fx::random_posts(rng, {.count = 300})) {
    auto renorm = p;
    renorm.text = text::to_utf8(text::decode_utf8(text::normalize_utf8(p.text)));
    EXPECT_EQ(match_post(fl, p), match_post(fl, renorm));
  }
}

TEST(MatchPost, MonotoneAndOrDecomposable) {
  fx::Rng rng(23);
  const auto posts = fx::random_posts(rng, {.count = 500});
  const std::vector<std::string> terms = {"flood", "water", "bridge", "น้ำท่วม", "rain"};
  Query growing;
  std::vector<bool> prev(posts.size(), false);
  for (const auto& t : terms) {
    growing.add(t, default_match_mode(std::vector<std::string>{t}));
    for (std::size_t i = 0; i < posts.size(); ++i) {
      const bool now = match_post(growing, posts[i]);
      EXPECT_TRUE(now || !prev[i]);
      prev[i] = now;
      // OR over single-term queries.
      bool any = false;
      for (const auto& qt : growing.terms()) {
        Query single;
        single.add(qt.utf8(), qt.mode);
        any = any || match_post(single, posts[i]);
      }
      EXPECT_EQ(now, any);
    }
  }
}

TEST(MatchPost, SeveralDictionariesAreOred) {
  const std::vector<Dictionary> ds = {dict({"flood"}), make_dictionary("th", "flood", std::vector<std::string>{"น้ำท่วม"})};
  const auto q = build_query(ds);
  EXPECT_EQ(q.size(), 2u);
  EXPECT_TRUE(match_post(q, post("flood")));
  EXPECT_TRUE(match_post(q, post("เกิดน้ำท่วม")));
}
