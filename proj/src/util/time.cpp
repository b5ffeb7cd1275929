#include "gradeforge/util/time.hpp"

#include <charconv>
#include <cstdio>

#include "gradeforge/error.hpp"

namespace gradeforge::util {

using namespace std::chrono;

Timestamp now_utc() { return time_point_cast<milliseconds>(Clock::now()); }

std::int64_t to_epoch_ms(Timestamp t) { return t.time_since_epoch().count(); }

Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{milliseconds{ms}}; }

std::string format_iso8601(Timestamp t) {
  auto day = floor<days>(t);
  year_month_day ymd{day};
  hh_mm_ss tod{t - day};
  char buf[64];
  long long ms = tod.subseconds().count();
  if (ms) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lld.%03lldZ",
                  int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                  long(tod.hours().count()), long(tod.minutes().count()),
                  static_cast<long long>(tod.seconds().count()), ms);
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ",
                  int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                  long(tod.hours().count()), long(tod.minutes().count()),
                  static_cast<long long>(tod.seconds().count()));
  }
  return buf;
}

namespace {

[[noreturn]] void bad_timestamp(std::string_view text) {
  throw Error(ErrorKind::validation,
              "invalid timestamp '" + std::string(text) +
                  "' (expected ISO-8601 like 2026-10-17T09:30:00Z)");
}

int read_int(std::string_view text, std::size_t pos, std::size_t len,
             std::string_view whole) {
  if (pos + len > text.size()) bad_timestamp(whole);
  int v = 0;
  auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
  if (ec != std::errc{} || p != text.data() + pos + len) bad_timestamp(whole);
  return v;
}

}  // namespace

Timestamp parse_iso8601(std::string_view text) {
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') bad_timestamp(text);
  year_month_day ymd{year{read_int(text, 0, 4, text)},
                     month{unsigned(read_int(text, 5, 2, text))},
                     day{unsigned(read_int(text, 8, 2, text))}};
  if (!ymd.ok()) bad_timestamp(text);
  milliseconds t = sys_days{ymd}.time_since_epoch();
  if (text.size() == 10) return Timestamp{t};
  if ((text[10] != 'T' && text[10] != ' ') || text.size() < 19 ||
      text[13] != ':' || text[16] != ':') {
    bad_timestamp(text);
  }
  int hh = read_int(text, 11, 2, text);
  int mm = read_int(text, 14, 2, text);
  int ss = read_int(text, 17, 2, text);
  if (hh > 23 || mm > 59 || ss > 60) bad_timestamp(text);
  t += hours{hh} + minutes{mm} + seconds{ss};
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    std::size_t start = pos;
    int frac = 0;
    int digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) {
        frac = frac * 10 + (text[pos] - '0');
        ++digits;
      }
      ++pos;
    }
    if (pos == start) bad_timestamp(text);
    while (digits < 3) {
      frac *= 10;
      ++digits;
    }
    t += milliseconds{frac};
  }
  if (pos == text.size()) bad_timestamp(text);  // zone is mandatory
  if (text[pos] == 'Z' && pos + 1 == text.size()) return Timestamp{t};
  if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size() &&
      text[pos + 3] == ':') {
    int oh = read_int(text, pos + 1, 2, text);
    int om = read_int(text, pos + 4, 2, text);
    milliseconds offset = hours{oh} + minutes{om};
    return Timestamp{text[pos] == '+' ? t - offset : t + offset};
  }
  bad_timestamp(text);
}

std::string iso_week_label(Timestamp t) {
  sys_days d = floor<days>(t);
  // ISO weeks belong to the year containing their Thursday.
  weekday wd{d};
  unsigned iso_wd = wd.iso_encoding();  // Monday = 1
  sys_days thursday = d + days{4 - int(iso_wd)};
  year y = year_month_day{thursday}.year();
  sys_days jan1 = sys_days{y / January / 1};
  int week = int((thursday - jan1).count() / 7) + 1;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-W%02d", int(y), week);
  return buf;
}

}  // namespace gradeforge::util
