#include <doctest.h>

#include <map>
#include <set>

#include "gates/answer.hpp"
#include "support.hpp"

using namespace gates;

TEST_CASE("extraction takes the last boxed marker") {
  CHECK(extract_final_answer("so x = \\boxed{42}.")->raw_span == "42");
  const auto nested = extract_final_answer("\\boxed{1} then \\boxed{\\frac{1}{2}}");
  REQUIRE(nested);
  CHECK(nested->raw_span == "\\frac{1}{2}");
  CHECK(nested->source_offset == 15);
  CHECK_FALSE(extract_final_answer("answer \\boxed{1+{2}"));
  CHECK_FALSE(extract_final_answer("no marker at all"));
  CHECK(extract_final_answer("\\boxed{}")->raw_span.empty());
}

TEST_CASE("an unclosed final marker hides earlier boxes") {
  CHECK_FALSE(extract_final_answer("\\boxed{3} and then \\boxed{4"));
}

TEST_CASE("extraction is idempotent on its own box") {
  gates::Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto s = gates::testing::random_boxed_text(rng);
    const auto got = extract_final_answer(s.text);
    REQUIRE(got.has_value() == s.expected.has_value());
    if (!got) continue;
    CHECK(got->raw_span == *s.expected);
    CHECK(got->source_offset == s.offset);
    const auto again = extract_final_answer("\\boxed{" + got->raw_span + "}");
    REQUIRE(again);
    CHECK(again->raw_span == got->raw_span);
  }
}

TEST_CASE("canonical forms") {
  const auto half = canonicalize("\\frac{2}{4}");
  CHECK(half.kind() == CanonicalAnswer::Kind::rational);
  CHECK(half.numerator() == 1);
  CHECK(half.denominator() == 2);
  CHECK(canonicalize("50%") == half);
  CHECK(canonicalize("0.5") == half);
  CHECK(canonicalize("1/2") == half);
  CHECK(canonicalize("$0.50$") == half);

  const auto sym = canonicalize("  x=y ");
  CHECK(sym.kind() == CanonicalAnswer::Kind::symbol);
  CHECK(sym.symbol_text() == "x=y");

  CHECK(canonicalize("7") == canonicalize("7.0"));
  CHECK(canonicalize("7").kind() == CanonicalAnswer::Kind::integer);
  CHECK(canonicalize("\\frac{14}{2}").kind() == CanonicalAnswer::Kind::integer);
  CHECK(canonicalize("-3") == canonicalize("\\frac{-6}{2}"));
  CHECK(canonicalize("-3") == canonicalize("-\\frac{6}{2}"));
  CHECK(canonicalize("-0") == canonicalize("0"));
  CHECK(canonicalize("12.5\\%") == canonicalize("1/8"));
  CHECK_FALSE(answers_equivalent(canonicalize("x+1"), canonicalize("1+x")));
}

TEST_CASE("zero denominators are symbols") {
  CHECK(canonicalize("1/0").kind() == CanonicalAnswer::Kind::symbol);
  CHECK(canonicalize("\\frac{3}{0}").kind() == CanonicalAnswer::Kind::symbol);
}

TEST_CASE("symbol normalization") {
  CHECK(normalize_symbol_text("  a \t\n b  ") == "a b");
  CHECK(normalize_symbol_text("$x$.") == "x");
  CHECK(normalize_symbol_text("$ x $,") == "x");
  CHECK(normalize_symbol_text("$$y$$") == "y");
  CHECK(normalize_symbol_text("z!;") == "z");
}

TEST_CASE("large integers stay exact") {
  const auto a = canonicalize("123456789012345678901234567890");
  CHECK(a.kind() == CanonicalAnswer::Kind::integer);
  CHECK(a.to_string() == "123456789012345678901234567890");
  CHECK(canonicalize("123456789012345678901234567890.000") == a);
}

TEST_CASE("to_string round-trips through canonicalize") {
  gates::Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto s = gates::testing::random_answer(rng);
    const auto a = canonicalize(s.text);
    CHECK(canonicalize(a.to_string()) == a);
  }
}

TEST_CASE("rationals are reduced with a positive denominator") {
  gates::Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    const auto a = canonicalize(gates::testing::random_answer(rng).text);
    if (!a.is_numeric()) continue;
    CHECK(a.denominator() > 0);
    CHECK(boost::multiprecision::gcd(a.numerator(), a.denominator()) == (a.numerator() == 0 ? a.denominator() : 1));
    CHECK((a.kind() == CanonicalAnswer::Kind::integer) == (a.denominator() == 1));
  }
}

TEST_CASE("equivalence matches an independent key") {
  gates::Rng rng(21);
  std::vector<gates::testing::AnswerSample> samples;
  for (int i = 0; i < 600; ++i) samples.push_back(gates::testing::random_answer(rng));
  std::map<std::string, std::set<std::string>> classes;
  for (const auto& s : samples) classes[s.key].insert(canonicalize(s.text).to_string());
  for (const auto& [key, forms] : classes) CHECK_MESSAGE(forms.size() == 1, key);
  for (std::size_t i = 0; i < samples.size(); i += 7)
    for (std::size_t j = 0; j < samples.size(); j += 5)
      CHECK(answers_equivalent(canonicalize(samples[i].text), canonicalize(samples[j].text)) ==
            (samples[i].key == samples[j].key));
}
