#include "gradeforge/core/compare.hpp"

#include "gradeforge/core/regex.hpp"

namespace gradeforge::core {

namespace {

bool is_trailing_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string normalize_output(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::size_t trimmed = end;
    while (trimmed > start && is_trailing_space(text[trimmed - 1])) --trimmed;
    out.append(text.substr(start, trimmed - start));
    if (nl == std::string_view::npos) break;
    out.push_back('\n');
    start = nl + 1;
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

bool compare_output(std::string_view expected, std::string_view actual_stdout,
                    Comparison mode) {
  const std::string actual = normalize_output(actual_stdout);
  switch (mode) {
    case Comparison::included:
      return actual.find(normalize_output(expected)) != std::string::npos;
    case Comparison::exact:
      return actual == normalize_output(expected);
    case Comparison::regex:
      return Regex::compile(expected).search(actual);
  }
  return false;
}

}  // namespace gradeforge::core
