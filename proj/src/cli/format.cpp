#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gradeforge/cli/cli.hpp"
#include "gradeforge/error.hpp"
#include "gradeforge/util/csv.hpp"
#include "gradeforge/util/time.hpp"

namespace gradeforge::cli {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Left-aligned columns separated by two spaces.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += r[i];
      if (i + 1 < r.size()) line += std::string(width[i] - r[i].size() + 2, ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string flag(bool b) { return b ? "true" : "false"; }

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::table: return "table";
    case OutputFormat::csv: return "csv";
    case OutputFormat::structured: return "structured";
  }
  return "table";
}

OutputFormat output_format_from_string(std::string_view s) {
  if (s == "table") return OutputFormat::table;
  if (s == "csv") return OutputFormat::csv;
  if (s == "structured" || s == "json") return OutputFormat::structured;
  throw Error(ErrorKind::validation, "output format must be table, csv or structured", "format");
}

void CliConfig::validate() const {
  const std::string prefix = "http://";
  bool ok = server_url.compare(0, prefix.size(), prefix) == 0 && server_url.size() > prefix.size();
  if (ok) {
    auto rest = server_url.substr(prefix.size());
    if (!rest.empty() && rest.back() == '/') rest.pop_back();
    ok = !rest.empty() && rest.find_first_of("/?# ") == std::string::npos;
    if (ok) {
      auto colon = rest.rfind(':');
      if (colon != std::string::npos && rest.find(']') == std::string::npos) {
        auto port = rest.substr(colon + 1);
        ok = colon > 0 && !port.empty() && port.size() <= 5 &&
             port.find_first_not_of("0123456789") == std::string::npos && std::stoi(port) <= 65535;
      }
    }
  }
  if (!ok) {
    throw Error(ErrorKind::validation, "server_url must look like http://host:port, got '" + server_url + "'",
                "server_url");
  }
}

CliConfig load_config_file(const std::filesystem::path& path, CliConfig base) {
  std::ifstream in(path);
  if (!in) return base;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    std::string where = path.string() + ":" + std::to_string(number);
    if (eq == std::string::npos) throw Error(ErrorKind::validation, where + ": expected key = value", "config");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key == "server_url") base.server_url = value;
    else if (key == "api_key") base.api_key = value;
    else if (key == "output_format") base.output_format = output_format_from_string(value);
    else throw Error(ErrorKind::validation, where + ": unknown key '" + key + "'", key);
  }
  return base;
}

std::filesystem::path default_config_path() {
  if (const char* p = std::getenv("GRADEFORGE_CONFIG"); p && *p) return p;
  if (const char* home = std::getenv("HOME"); home && *home) return std::filesystem::path(home) / ".gradeforge.conf";
  return ".gradeforge.conf";
}

std::string format_report(const core::GradeReport& report, OutputFormat format) {
  switch (format) {
    case OutputFormat::table: {
      std::vector<std::vector<std::string>> rows = {{"TEST", "STATUS", "POINTS", "DETAIL"}};
      for (const auto& r : report.results) {
        rows.push_back({r.test_name, std::string(core::to_string(r.status)), std::to_string(r.points_earned),
                        r.detail});
      }
      return render_table(rows) + "total " + std::to_string(report.earned) + "/" + std::to_string(report.max) +
             (report.all_passed ? "  all tests passed\n" : "\n");
    }
    case OutputFormat::csv: {
      std::string out = util::csv_row({"test", "status", "points", "detail"});
      for (const auto& r : report.results) {
        out += util::csv_row({r.test_name, std::string(core::to_string(r.status)),
                              std::to_string(r.points_earned), r.detail});
      }
      out += util::csv_row({"total", report.all_passed ? "passed" : "failed", std::to_string(report.earned),
                            std::to_string(report.max)});
      return out;
    }
    case OutputFormat::structured: {
      std::string out;
      for (const auto& r : report.results) {
        out += core::dump_json({{"test", r.test_name},
                                {"status", std::string(core::to_string(r.status))},
                                {"points", r.points_earned},
                                {"detail", r.detail}}) +
               "\n";
      }
      out += core::dump_json({{"total", report.earned}, {"max", report.max}, {"all_passed", report.all_passed}}) +
             "\n";
      return out;
    }
  }
  return {};
}

std::string format_status(const std::vector<classroom::StatusRow>& rows, OutputFormat format) {
  auto time_text = [](const std::optional<util::Timestamp>& t) {
    return t ? util::format_iso8601(*t) : std::string();
  };
  switch (format) {
    case OutputFormat::table: {
      std::vector<std::vector<std::string>> table = {{"OWNER", "MEMBERS", "WORKSPACE", "ACCEPTED", "SUBMITTED",
                                                      "PASSED", "POINTS", "MAX", "LAST_SUBMISSION"}};
      auto dash = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
      for (const auto& r : rows) {
        table.push_back({r.owner, dash(join(r.members, ';')), dash(r.workspace_id.value_or("")), flag(r.accepted),
                         flag(r.submitted), flag(r.passed), std::to_string(r.points),
                         std::to_string(r.max_points), dash(time_text(r.last_submission_at))});
      }
      return render_table(table);
    }
    case OutputFormat::csv: {
      std::string out = util::csv_row({"owner", "members", "workspace_id", "accepted", "submitted", "passed",
                                       "points", "max_points", "last_submission_at"});
      for (const auto& r : rows) {
        out += util::csv_row({r.owner, join(r.members, ';'), r.workspace_id.value_or(""), flag(r.accepted),
                              flag(r.submitted), flag(r.passed), std::to_string(r.points),
                              std::to_string(r.max_points), time_text(r.last_submission_at)});
      }
      return out;
    }
    case OutputFormat::structured: {
      std::string out;
      for (const auto& r : rows) out += core::dump_json(classroom::to_json(r)) + "\n";
      return out;
    }
  }
  return {};
}

}  // namespace gradeforge::cli
