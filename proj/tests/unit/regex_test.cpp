#include "gradeforge/core/regex.hpp"

#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "gradeforge/error.hpp"

namespace gradeforge::core {
namespace {

bool search(const std::string& pattern, const std::string& text) {
  return Regex::compile(pattern).search(text);
}

TEST(Regex, Basics) {
  EXPECT_TRUE(search("abc", "xxabcxx"));
  EXPECT_FALSE(search("^abc", "xabc"));
  EXPECT_TRUE(search("abc$", "xabc"));
  EXPECT_FALSE(search("abc$", "abcx"));
  EXPECT_TRUE(search("a|b", "b"));
  EXPECT_TRUE(search("(ab)+c", "ababc"));
  EXPECT_TRUE(search("^a{2,3}$", "aaa"));
  EXPECT_FALSE(search("^a{2,3}$", "aaaa"));
  EXPECT_TRUE(search("^a{2,}$", "aaaaaa"));
  EXPECT_TRUE(search("^[[:digit:]]+$", "0123"));
  EXPECT_TRUE(search("^[^0-9]+$", "abc"));
  EXPECT_TRUE(search("[]a]", "]"));
  EXPECT_TRUE(search("^\\d+\\.\\d+$", "1.85"));
  EXPECT_TRUE(search("\\w+\\s\\w+", "hello world"));
  EXPECT_TRUE(search("", "anything"));
  EXPECT_TRUE(search("^$", ""));
  EXPECT_FALSE(search("a.c", "a\nc"));
  EXPECT_TRUE(search("(a*)*b", "aaab"));
}

TEST(Regex, LinearTimeOnPathologicalInput) {
  // Exponential for a backtracking engine.
  std::string text(5000, 'a');
  EXPECT_FALSE(search("^(a|aa)*(a*)*b$", text));
  std::string big(1 << 20, 'x');
  EXPECT_TRUE(search(".*x$", big));
}

TEST(Regex, RejectsUnsupportedSyntax) {
  for (const char* bad : {"(a)\\1", "(ab", "ab)", "*a", "a{3,1}", "a{x}", "[b-a]",
                          "[abc", "\\", "[[:nope:]]", "\\q", "^*"}) {
    try {
      Regex::compile(bad);
      ADD_FAILURE() << "accepted " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::comparison) << bad;
    }
  }
}

// Random patterns from the subset both engines agree on, checked against
// std::regex in POSIX-extended mode.
class PatternGen {
 public:
  explicit PatternGen(unsigned seed) : rng_(seed) {}

  std::string pattern(int depth = 0) {
    std::string out;
    int pieces = pick(1, 3);
    for (int i = 0; i < pieces; ++i) out += piece(depth);
    if (depth < 2 && pick(0, 4) == 0) out += "|" + pattern(depth + 1);
    return out;
  }

  std::string text() {
    std::string s;
    for (int i = pick(0, 12); i > 0; --i) s.push_back("abc1"[pick(0, 3)]);
    return s;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::string atom(int depth) {
    switch (pick(0, 6)) {
      case 0: return ".";
      case 1: return "[ab]";
      case 2: return "[^a]";
      case 3: return depth < 2 ? "(" + pattern(depth + 1) + ")" : "a";
      case 4: return "[[:digit:]]";
      default: return std::string(1, "abc1"[pick(0, 3)]);
    }
  }

  std::string piece(int depth) {
    std::string a = atom(depth);
    switch (pick(0, 7)) {
      case 0: return a + "*";
      case 1: return a + "+";
      case 2: return a + "?";
      case 3: return a + "{1,2}";
      case 4: return a + "{2}";
      case 5: return (pick(0, 1) ? "^" : "") + a;
      case 6: return a + (pick(0, 1) ? "$" : "");
      default: return a;
    }
  }

  std::mt19937 rng_;
};

TEST(Regex, AgreesWithStdRegexExtended) {
  PatternGen gen(2024);
  int compared = 0;
  for (int i = 0; i < 3000; ++i) {
    std::string p = gen.pattern();
    std::regex oracle;
    try {
      oracle = std::regex(p, std::regex::extended);
    } catch (const std::regex_error&) {
      continue;
    }
    Regex mine = Regex::compile(p);
    for (int j = 0; j < 5; ++j) {
      std::string t = gen.text();
      ASSERT_EQ(mine.search(t), std::regex_search(t, oracle))
          << "pattern " << p << " text " << t;
      ++compared;
    }
  }
  EXPECT_GT(compared, 10000);
}

}  // namespace
}  // namespace gradeforge::core
