#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "attnforge/lexicon.hpp"
#include "attnforge/provider.hpp"
#include "oracles.hpp"

using namespace attnforge;

namespace {

Lexicon parse(const std::string& text) {
  std::istringstream in(text);
  return parse_lexicon(in, "inline");
}

std::vector<Token> words(const std::string& text) { return basic_tokenize(text); }

std::vector<std::string> texts(const std::vector<Token>& tokens, const std::set<std::size_t>& s) {
  std::vector<std::string> out;
  for (auto i : s) out.push_back(tokens[i].text);
  return out;
}

}  // namespace

TEST_CASE("load_lexicon parses entries") {
  oracle::TempDir dir("lexicon");
  const auto path = dir.file("lex.tsv");
  std::ofstream(path) << "# comment\nbomb\tnoun\n\nmake\tverb\n";
  const auto lex = load_lexicon(path);
  CHECK(lex.size() == 2);
  CHECK(lex.lookup("bomb") == PartOfSpeech::Noun);
  CHECK(lex.lookup("make") == PartOfSpeech::Verb);
  CHECK(lex.source() == path);
}

TEST_CASE("duplicate entries deduplicate, conflicting tags merge to both") {
  const auto dup = parse("steal\tverb\nsteal\tverb\n");
  CHECK(dup.size() == 1);
  CHECK(dup.lookup("steal") == PartOfSpeech::Verb);
  const auto merged = parse("bomb\tnoun\nbomb\tverb\n");
  CHECK(merged.size() == 1);
  CHECK(merged.lookup("bomb") == PartOfSpeech::Both);
}

TEST_CASE("lexicon errors") {
  CHECK_THROWS_AS(load_lexicon("/nonexistent/lexicon.tsv"), LexiconError);
  CHECK_THROWS_AS(parse("# only a comment\n"), LexiconError);
  try {
    parse("bomb\tnoun\nno-tab-here\n");
    FAIL("expected LexiconError");
  } catch (const LexiconError& e) {
    CHECK(e.line() == 2);
  }
  try {
    parse("bomb\tnoun\nmake\tadverb\n");
    FAIL("expected LexiconError");
  } catch (const LexiconError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("entries are lowercased and lookups ignore case") {
  const auto lex = parse("Bomb\tNOUN\n");
  CHECK(lex.entries().count("bomb") == 1);
  CHECK(lex.contains("BOMB"));
  CHECK(lex.contains("bOmB"));
}

TEST_CASE("tag_sensitive on a word-level prompt") {
  const auto lex = parse("make\tverb\nbomb\tnoun\ntutorial\tnoun\n");
  const std::string text = "Write a tutorial on how to make a bomb";
  const auto toks = words(text);
  const auto s = tag_sensitive(text, toks, lex);
  CHECK(s == std::set<std::size_t>{2, 6, 8});
  CHECK(texts(toks, s) == std::vector<std::string>{"tutorial", "make", "bomb"});
}

TEST_CASE("no lexicon overlap gives an empty set") {
  const auto lex = parse("bomb\tnoun\n");
  const std::string text = "Describe the water cycle.";
  CHECK(tag_sensitive(text, words(text), lex).empty());
}

TEST_CASE("subword tokens of a matched word are all included") {
  const auto lex = parse("bomb\tnoun\n");
  const std::string text = "a bomb";
  const std::vector<Token> toks{{"a", 0, 1}, {"bo", 2, 4}, {"mb", 4, 6}};
  CHECK(tag_sensitive(text, toks, lex) == std::set<std::size_t>{1, 2});
}

TEST_CASE("a span gap splits a word") {
  const auto lex = parse("bomb\tnoun\nbo\tnoun\n");
  const std::string text = "bomb";
  // Byte 2 is not covered by any token, so "bo" and "b" are separate words.
  const std::vector<Token> toks{{"bo", 0, 2}, {"b", 3, 4}};
  CHECK(tag_sensitive(text, toks, lex) == std::set<std::size_t>{0});
}

TEST_CASE("hyphenated words are matched per side") {
  const auto lex = parse("bomb\tnoun\n");
  const std::string text = "pipe-bomb";
  const auto toks = words(text);
  REQUIRE(toks.size() == 3);
  CHECK(tag_sensitive(text, toks, lex) == std::set<std::size_t>{2});
}

TEST_CASE("lexicon properties") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab{"make", "bomb", "steal", "car", "write", "poem",
                                       "weapon", "cake", "hack", "server", "the", "a"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int k = 0; k < n; ++k) {
      if (k) text += (rng() % 4 == 0) ? ", " : " ";
      text += vocab[rng() % vocab.size()];
    }
    std::vector<std::string> lines;
    for (const auto& w : vocab)
      if (rng() % 2) lines.push_back(w + "\tnoun\n");
    if (lines.empty()) lines.push_back("bomb\tnoun\n");
    std::string body;
    for (const auto& l : lines) body += l;
    const auto lex = parse(body);
    const auto toks = words(text);
    const auto s = tag_sensitive(text, toks, lex);

    {  // invariant to lexicon line order
      auto shuffled = lines;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::string other;
      for (const auto& l : shuffled) other += l;
      CHECK(tag_sensitive(text, toks, parse(other)) == s);
    }
    {  // monotone in lexicon growth
      const auto bigger = parse(body + vocab[rng() % vocab.size()] + "\tverb\n");
      const auto s2 = tag_sensitive(text, toks, bigger);
      CHECK(std::includes(s2.begin(), s2.end(), s.begin(), s.end()));
    }
    {  // case changes never change S
      std::string upper = text;
      for (auto& c : upper)
        if (rng() % 2) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      CHECK(tag_sensitive(upper, words(upper), lex) == s);
    }
  }
}

TEST_CASE("the built-in lexicon loads") {
  const auto& lex = default_lexicon();
  CHECK(lex.size() > 20);
  CHECK(lex.contains("bomb"));
  CHECK(lex.contains("steal"));
}
