#pragma once

#include <string>
#include <string_view>

#include "gradeforge/core/test_suite.hpp"

namespace gradeforge::core {

// Strips trailing whitespace from every line, then trailing newlines.
// Idempotent.
std::string normalize_output(std::string_view text);

// included: normalize(actual) contains normalize(expected);
// exact:    normalize(actual) == normalize(expected);
// regex:    `expected` is a pattern that matches somewhere in normalize(actual).
// Throws Error(comparison) for an invalid pattern.
bool compare_output(std::string_view expected, std::string_view actual_stdout,
                    Comparison mode);

}  // namespace gradeforge::core
