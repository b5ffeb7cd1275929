#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gradeforge::util {

// RFC 4180 field quoting: fields containing a comma, quote, CR or LF are
// wrapped in quotes with embedded quotes doubled.
std::string csv_field(std::string_view value);
std::string csv_row(const std::vector<std::string>& fields);

// Parses RFC 4180 text into records. Accepts LF or CRLF line ends and a
// missing final newline. Throws Error(validation) on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace gradeforge::util
