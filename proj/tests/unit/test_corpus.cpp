#include <doctest.h>

#include "support.hpp"

using namespace specsyn;
using namespace specsyn::corpus;

TEST_CASE("sentence splitting") {
  CHECK(ingest("Set a. Then b.", DocumentFormat::PlainText) == std::vector<std::string>{"Set a.", "Then b."});
  CHECK(ingest("See page 157 for details of MySQL 11.7.8", DocumentFormat::PlainText).size() == 1);
  CHECK_THROWS_AS(ingest("   \n  ", DocumentFormat::PlainText), EmptyDocument);
}

TEST_CASE("html stripping") {
  const auto s = ingest("<html><body><p>Set <b>max_rows</b> to 5.</p><script>var x = 1;</script></body></html>",
                        DocumentFormat::HtmlStripped);
  REQUIRE(s.size() == 1);
  CHECK(s[0].find("max_rows") != std::string::npos);
  CHECK(s[0].find('<') == std::string::npos);
}

TEST_CASE("comment extraction example") {
  CHECK(ingest("/* must be > 0 */ int x; // tmp", DocumentFormat::SourceComments) ==
        std::vector<std::string>{"must be > 0", "tmp"});
  CHECK(extract_comments("s = \"// not a comment\"; // real") == std::vector<std::string>{"real"});
}

TEST_CASE("comment extraction against a reference extractor") {
  // Each generated line holds at most one comment next to code, so every
  // comment is its own body; the reference simply records what was inserted.
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::string src;
    std::vector<std::string> expected;
    const auto lines = rng.uniform_int(1, 12);
    for (std::int64_t l = 0; l < lines; ++l) {
      std::string words;
      const auto n = rng.uniform_int(1, 5);
      for (std::int64_t w = 0; w < n; ++w) words += (w ? " " : "") + testing::random_word(rng);
      const std::string code = "int " + testing::random_word(rng) + " = " + std::to_string(rng.uniform_int(0, 99)) + ";";
      switch (rng.index(4)) {
        case 0: src += code + "\n"; break;
        case 1:
          src += code + " // " + words + "\n";
          expected.push_back(words);
          break;
        case 2:
          src += "/* " + words + " */ " + code + "\n";
          expected.push_back(words);
          break;
        default:
          src += code + " /* " + words + " */\n";
          expected.push_back(words);
          break;
      }
    }
    INFO(src);
    REQUIRE(extract_comments(src) == expected);
  }
}

TEST_CASE("keyword matching") {
  KeywordSet k("mysql", {"max_rows", "user_port", "max"});
  const auto m = k.find_all("Set MAX_ROWS and --user_port, not max_rowsx or max.");
  REQUIRE(m.size() == 3);
  CHECK(m[0].keyword == "max_rows");
  CHECK(m[1].keyword == "user_port");
  CHECK(m[2].keyword == "max");
  CHECK(k.matched("nothing here").empty());
}

TEST_CASE("candidate windows") {
  KeywordSet k("mysql", {"max_rows"});
  const std::vector<std::string> sentences = {
      "The default pointer size in bytes is used when max_rows option is specified.",
      "This variable should be between 2 and 7."};
  const auto c = extract_candidates(sentences, k, 2);
  REQUIRE(c.size() == 2);
  CHECK(c[0].type == ExtractionType::Simple);
  CHECK(c[0].text == sentences[0]);
  CHECK(c[1].type == ExtractionType::ComplexSingle);
  CHECK(c[1].sentence_count == 2);
  CHECK(c[1].text.find("between 2 and 7") != std::string::npos);

  const auto one = extract_candidates({sentences[0]}, k, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].type == ExtractionType::Simple);

  CHECK(extract_candidates({"No keywords at all."}, k, 3).empty());
  CHECK_THROWS_AS(extract_candidates(sentences, k, 0), Error);
}

TEST_CASE("candidates record every keyword") {
  KeywordSet k("mysql", {"have_ssl", "have_open_ssl"});
  const auto c = extract_candidates({"have_ssl and have_open_ssl need to be set True."}, k, 1);
  REQUIRE(c.size() == 1);
  CHECK(c[0].keywords.size() == 2);
}
