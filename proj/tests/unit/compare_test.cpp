#include "gradeforge/core/compare.hpp"

#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "gradeforge/error.hpp"

namespace gradeforge::core {
namespace {

TEST(CompareOutput, IncludedMatchesPrintedValue) {
  EXPECT_TRUE(compare_output("1.2", "1.2\n", Comparison::included));
  EXPECT_TRUE(compare_output("1.2", "average = 1.2\n", Comparison::included));
  EXPECT_FALSE(compare_output("1.2", "1.3\n", Comparison::included));
}

TEST(CompareOutput, ExactCases) {
  EXPECT_TRUE(compare_output("abc", "abc", Comparison::exact));
  EXPECT_TRUE(compare_output("abc", "abc ", Comparison::exact));
  EXPECT_FALSE(compare_output("abc", "abcd", Comparison::exact));
  EXPECT_TRUE(compare_output("a\nb", "a  \nb\t\n\n", Comparison::exact));
  EXPECT_TRUE(compare_output("a\nb", "a\r\nb\r\n", Comparison::exact));
  EXPECT_FALSE(compare_output("a\nb", "a\n\nb", Comparison::exact));
}

TEST(CompareOutput, RegexAgainstIndependentEvaluation) {
  const std::string pattern = R"(^[0-9]+\.[0-9]+$)";
  // Independent route: the standard library's POSIX-extended engine applied
  // to the normalized output.
  std::regex oracle(pattern, std::regex::extended);
  ASSERT_TRUE(std::regex_search(normalize_output("1.85\n"), oracle));
  EXPECT_TRUE(compare_output(pattern, "1.85\n", Comparison::regex));
  EXPECT_FALSE(compare_output(pattern, "x1.85\n", Comparison::regex));
}

TEST(CompareOutput, InvalidRegexIsComparisonError) {
  try {
    compare_output("(unclosed", "anything", Comparison::regex);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::comparison);
  }
}

TEST(NormalizeOutput, Examples) {
  EXPECT_EQ(normalize_output(""), "");
  EXPECT_EQ(normalize_output("\n\n"), "");
  EXPECT_EQ(normalize_output("x  \n y \t\n"), "x\n y");
  EXPECT_EQ(normalize_output("  lead"), "  lead");
  EXPECT_EQ(normalize_output("a\n \n"), "a");
}

std::string random_text(std::mt19937& rng, int max_len) {
  static constexpr char kAlphabet[] = "ab \t\n\r1.";
  std::uniform_int_distribution<int> len(0, max_len);
  std::uniform_int_distribution<int> pick(0, sizeof(kAlphabet) - 2);
  std::string s;
  for (int i = len(rng); i > 0; --i) s.push_back(kAlphabet[pick(rng)]);
  return s;
}

TEST(NormalizeOutput, Idempotent) {
  std::mt19937 rng(11);
  for (int i = 0; i < 2000; ++i) {
    std::string s = random_text(rng, 24);
    std::string once = normalize_output(s);
    ASSERT_EQ(normalize_output(once), once) << testing::PrintToString(s);
  }
}

TEST(CompareOutput, ExactImpliesIncluded) {
  std::mt19937 rng(12);
  int exact_hits = 0;
  for (int i = 0; i < 5000; ++i) {
    std::string expected = random_text(rng, 6);
    // Bias towards related pairs so the implication is exercised.
    std::string actual = (i % 2) ? expected + random_text(rng, 3) : random_text(rng, 6);
    if (compare_output(expected, actual, Comparison::exact)) {
      ++exact_hits;
      ASSERT_TRUE(compare_output(expected, actual, Comparison::included))
          << testing::PrintToString(expected) << " vs " << testing::PrintToString(actual);
    }
  }
  EXPECT_GT(exact_hits, 100);
}

}  // namespace
}  // namespace gradeforge::core
