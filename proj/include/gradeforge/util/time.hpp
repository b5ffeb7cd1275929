#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

namespace gradeforge::util {

using Clock = std::chrono::system_clock;
using Timestamp = std::chrono::time_point<Clock, std::chrono::milliseconds>;

Timestamp now_utc();
// Injected wherever lifecycle code needs "now"; tests pass a controlled clock.
using ClockFn = std::function<Timestamp()>;

std::int64_t to_epoch_ms(Timestamp t);
Timestamp from_epoch_ms(std::int64_t ms);

// "YYYY-MM-DDTHH:MM:SSZ", with ".mmm" inserted when milliseconds are non-zero.
std::string format_iso8601(Timestamp t);
// Accepts "YYYY-MM-DDTHH:MM:SS[.fff](Z|+HH:MM|-HH:MM)" and "YYYY-MM-DD".
// Throws Error(validation) otherwise.
Timestamp parse_iso8601(std::string_view text);

// ISO-8601 week label such as "2026-W42".
std::string iso_week_label(Timestamp t);

}  // namespace gradeforge::util
