#pragma once

#include <bitset>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gradeforge::core {

// Portable POSIX-extended-style pattern matcher used for the `regex`
// comparison mode. Supported: literals, `.`, bracket expressions with ranges,
// negation and [:class:] names, `^`/`$` anchors (string start/end),
// alternation, grouping, `*` `+` `?` `{m}` `{m,}` `{m,n}`, and the escapes
// \d \w \s \D \W \S \n \t plus escaped punctuation. Backreferences are
// rejected.
//
// Matching simulates the compiled NFA over all threads at once, so search
// time is O(pattern * text) and never backtracks.
class Regex {
 public:
  // Throws Error(comparison) describing the syntax problem.
  static Regex compile(std::string_view pattern);

  // True if the pattern matches any substring of `text`.
  bool search(std::string_view text) const;

  const std::string& pattern() const { return pattern_; }

 private:
  enum class Op : std::uint8_t { byte, any, set, split, jump, bol, eol, match };
  struct Inst {
    Op op;
    unsigned char byte = 0;
    std::uint32_t x = 0;  // set index, or jump/split target
    std::uint32_t y = 0;  // second split target
  };

  friend class RegexCompiler;

  std::string pattern_;
  std::vector<Inst> program_;
  std::vector<std::bitset<256>> sets_;
};

}  // namespace gradeforge::core
