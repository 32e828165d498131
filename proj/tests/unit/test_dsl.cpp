#include <doctest.h>

#include "support.hpp"

using namespace specsyn;
using namespace specsyn::dsl;

TEST_CASE("parse examples") {
  CHECK(parse_spec("user_port > 1500") == single(make_rule("user_port", Relation::Gt, {Number{1500, {}}})));
  CHECK(parse_spec("max_rows in [2, 7]") ==
        single(make_rule("max_rows", Relation::Interval, {Number{2, {}}, Number{7, {}}})));

  const auto s = parse_spec("have_ssl == true and have_open_ssl == true");
  REQUIRE(s.rules.size() == 2);
  CHECK(s.connectives == std::vector<Connective>{Connective::And});
  CHECK(s.rules[0] == make_rule("have_ssl", Relation::Eq, {Boolean{true}}));
  CHECK(s.rules[1] == make_rule("have_open_ssl", Relation::Eq, {Boolean{true}}));

  CHECK_THROWS_AS(parse_spec("x in [7, 2]"), IntervalOrderError);
  CHECK_THROWS_AS(parse_spec("x in [7 mb, 9 kb]"), UnitMismatchError);
  CHECK_THROWS_AS(parse_spec("x in {1}"), ArityError);
  CHECK_THROWS_AS(parse_spec(""), SyntaxError);
  CHECK_THROWS_AS(parse_spec("x >"), SyntaxError);
  CHECK_THROWS_AS(parse_spec("x > 1 and"), SyntaxError);
  CHECK_THROWS_AS(parse_spec("in > 1"), SyntaxError);
}

TEST_CASE("syntax errors carry position and expectations") {
  try {
    parse_spec("user_port >> 1500");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.position() > 0);
    CHECK(!e.expected().empty());
  }
}

TEST_CASE("print examples") {
  CHECK(print_spec(single(make_rule("user_port", Relation::Gt, {Number{1500, {}}}))) == "user_port > 1500");
  CHECK(print_spec(single(make_rule("sync", Relation::Use))) == "use(sync)");
  CHECK(print_spec(single(make_rule("p", Relation::StringFormat, {FormatClass{"absolute path"}}))) ==
        "format(p, \"absolute path\")");
  CHECK(print_spec(parse_spec("  x   in[ 64 mb ,128  mb]")) == "x in [64 mb, 128 mb]");
  CHECK(print_spec(parse_spec("a == \"say \\\"hi\\\"\"")) == "a == \"say \\\"hi\\\"\"");
}

TEST_CASE("category inference") {
  CHECK(infer_category(parse_spec("max_rows in [2, 7]")) == Category::Quantitative);
  CHECK(infer_category(parse_spec("use(sync)")) == Category::Utilization);
  CHECK(infer_category(parse_spec("recommend(ssl_ca)")) == Category::Generic);
  CHECK(infer_category(parse_spec("with(a, b)")) == Category::Interrelation);
  CHECK(infer_category(parse_spec("format(a, \"url\")")) == Category::Attribute);
}

TEST_CASE("random round trip covers every relation") {
  Rng rng(2024);
  std::vector<int> seen(kRelationCount, 0);
  for (int i = 0; i < 1000; ++i) {
    const auto rel = static_cast<Relation>(static_cast<std::size_t>(i) % kRelationCount);
    const auto s = testing::random_spec(rng, rel);
    REQUIRE_NOTHROW(validate(s));
    const auto text = print_spec(s);
    INFO(text);
    REQUIRE(parse_spec(text) == s);
    for (const auto& r : s.rules) ++seen[static_cast<std::size_t>(r.relation)];
  }
  for (auto c : seen) CHECK(c > 0);
}

TEST_CASE("spec files") {
  const auto lines = parse_spec_file("# comment\n\nuser_port > 1500\nuse(sync)\n");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].line == 3);
  CHECK(lines[1].line == 4);
  try {
    parse_spec_file("a > 1\nb >\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}
