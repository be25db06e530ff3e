#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>

#include "doctest.h"
#include "nmn/program.hpp"
#include "nmn/rng.hpp"

using namespace nmn;

namespace {

// random well-typed program over the signature table, for round-trip checks
std::string random_program(Rng& rng, ValueType want, int depth) {
  auto span = [&] {
    int a = rng.bounded(6);
    return "Q[" + std::to_string(a) + ":" + std::to_string(a + 1 + rng.bounded(3)) + "]";
  };
  if (want == ValueType::PAtt) {
    if (depth <= 1) return "find(" + span() + ")";
    switch (rng.bounded(6)) {
      case 0: return "find(" + span() + ")";
      case 1: return "filter(" + span() + ", " + random_program(rng, ValueType::PAtt, depth - 1) + ")";
      case 2: return "relocate(" + span() + ", " + random_program(rng, ValueType::PAtt, depth - 1) + ")";
      case 3: return "find-max-num(" + random_program(rng, ValueType::PAtt, depth - 1) + ")";
      case 4: return "find-min-num(" + random_program(rng, ValueType::PAtt, depth - 1) + ")";
      default:
        return "compare-num-lt-than(" + random_program(rng, ValueType::PAtt, depth - 1) +
               ", " + random_program(rng, ValueType::PAtt, depth - 1) + ")";
    }
  }
  if (want == ValueType::NumDist) return "find-num(" + random_program(rng, ValueType::PAtt, depth - 1) + ")";
  if (want == ValueType::DateDist) return "find-date(" + random_program(rng, ValueType::PAtt, depth - 1) + ")";
  if (want == ValueType::CountDist) return "count(" + random_program(rng, ValueType::PAtt, depth - 1) + ")";
  if (want == ValueType::YearDiffDist)
    return "year-diff(" + random_program(rng, ValueType::DateDist, depth - 1) + ", " +
           random_program(rng, ValueType::DateDist, depth - 1) + ")";
  return "span(" + random_program(rng, ValueType::PAtt, depth - 1) + ")";
}

ValueType random_root(Rng& rng) {
  switch (rng.bounded(6)) {
    case 0: return ValueType::PAtt;
    case 1: return ValueType::NumDist;
    case 2: return ValueType::DateDist;
    case 3: return ValueType::CountDist;
    case 4: return ValueType::YearDiffDist;
    default: return ValueType::Span;
  }
}

}  // namespace

TEST_CASE("parse builds the expected trees") {
  SUBCASE("two-node chain") {
    Program p = parse_program("find-num(find(Q[0:6]))");
    CHECK(p.node_count() == 2);
    CHECK(p.root->module == "find-num");
    CHECK(p.root->children[0]->module == "find");
    REQUIRE(p.root->children[0]->span.has_value());
    CHECK(p.root->children[0]->span->begin == 0);
    CHECK(p.root->children[0]->span->end == 6);
  }
  SUBCASE("five-node date difference") {
    Program p = parse_program(
        "year-diff(find-date(find(Q[0:4])), find-date(find(Q[5:9])))");
    CHECK(p.node_count() == 5);
    CHECK(p.depth() == 3);
  }
  SUBCASE("arity errors are rejected") {
    CHECK_THROWS_WITH_AS(parse_program("find-num()"), doctest::Contains("expects 1"),
                         parse_error);
    CHECK_THROWS_WITH_AS(parse_program("find-num(find(Q[0:1]), find(Q[0:1]))"),
                         doctest::Contains("expects 1"), parse_error);
  }
  SUBCASE("unknown module names are rejected") {
    CHECK_THROWS_WITH_AS(parse_program("frobnicate(Q[0:1])"),
                         doctest::Contains("unknown module"), parse_error);
  }
  SUBCASE("syntax errors carry line and column") {
    try {
      parse_program("find(Q[0:1]");
      FAIL("expected parse_error");
    } catch (const parse_error& e) {
      CHECK(e.line == 1);
      CHECK(e.col >= 11);
    }
  }
  SUBCASE("spans only where the signature allows them") {
    CHECK_THROWS_AS(parse_program("count(Q[0:1], find(Q[0:1]))"), parse_error);
    CHECK_NOTHROW(parse_program("find-num(Q[0:1], find(Q[0:1]))"));
  }
}

TEST_CASE("typecheck assigns types from the signature table") {
  SUBCASE("count roots as CountDist") {
    Program p = parse_program("count(find(Q[0:3]))");
    typecheck(p, 5);
    CHECK(p.root->type == ValueType::CountDist);
  }
  SUBCASE("year-diff rejects paragraph attention arguments") {
    Program p = parse_program("year-diff(find(Q[0:2]), find(Q[2:4]))");
    CHECK_THROWS_WITH_AS(typecheck(p, 5), doctest::Contains("expected DateDist"),
                         parse_error);
  }
  SUBCASE("span bounds are checked against the question") {
    Program p = parse_program("find(Q[0:99])");
    CHECK_THROWS_WITH_AS(typecheck(p, 10), doctest::Contains("out of range"), parse_error);
    Program p2 = parse_program("find(Q[3:3])");
    CHECK_THROWS_AS(typecheck(p2, 10), parse_error);
  }
  SUBCASE("depth budget") {
    std::string deep = "find(Q[0:1])";
    for (int i = 0; i < 13; ++i) deep = "filter(Q[0:1], " + deep + ")";
    Program ok = parse_program(deep);
    CHECK(ok.depth() == 14);
    CHECK_NOTHROW(typecheck(ok, 4));
    Program too_deep = parse_program("filter(Q[0:1], " + deep + ")");
    CHECK(too_deep.depth() == 15);
    CHECK_THROWS_WITH_AS(typecheck(too_deep, 4), doctest::Contains("depth"), parse_error);
  }
}

TEST_CASE("print gives a canonical round-trippable form") {
  SUBCASE("whitespace noise canonicalizes") {
    Program p = parse_program("  find-num(   find( Q[ 0 : 6 ] )  ) ");
    CHECK(print_program(p) == "find-num(find(Q[0:6]))");
  }
  SUBCASE("fixed examples round trip") {
    for (const std::string text :
         {"find-num(find(Q[0:6]))",
          "year-diff(find-date(find(Q[0:4])), find-date(find(Q[5:9])))",
          "span(relocate(Q[0:1], find-max-num(find(Q[4:6]))))",
          "find-num(Q[2:3], find(Q[2:3]))"}) {
      Program p = parse_program(text);
      Program q = parse_program(print_program(p));
      CHECK(structurally_equal(p, q));
      CHECK(print_program(q) == print_program(p));
    }
  }
  SUBCASE("200 random programs round trip") {
    Rng rng(31);
    for (int i = 0; i < 200; ++i) {
      Program p;
      REQUIRE_NOTHROW(p = parse_program(random_program(rng, random_root(rng), 1 + rng.bounded(4))));
      Program q = parse_program(print_program(p));
      CHECK(structurally_equal(p, q));
      CHECK(print_program(q) == print_program(p));
    }
  }
}

TEST_CASE("typechecking is deterministic and total on parsed programs") {
  Rng rng(32);
  for (int i = 0; i < 100; ++i) {
    Program p = parse_program(random_program(rng, random_root(rng), 1 + rng.bounded(4)));
    bool threw1 = false, threw2 = false;
    try {
      typecheck(p, 8);
    } catch (const parse_error&) {
      threw1 = true;
    }
    Program q = parse_program(print_program(p));
    try {
      typecheck(q, 8);
    } catch (const parse_error&) {
      threw2 = true;
    }
    CHECK(threw1 == threw2);
  }
}
