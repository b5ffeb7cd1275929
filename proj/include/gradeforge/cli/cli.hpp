#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gradeforge/classroom/model.hpp"
#include "gradeforge/core/report.hpp"

namespace gradeforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad flags, bad input files, 4xx from the server
inline constexpr int kExitServer = 2;   // unreachable, 401, 5xx, grading failure
inline constexpr int kExitFailing = 3;  // graded, but not every test passed

enum class OutputFormat { table, csv, structured };

std::string_view to_string(OutputFormat f);
// Throws Error(validation).
OutputFormat output_format_from_string(std::string_view s);

struct CliConfig {
  std::string server_url = "http://127.0.0.1:8080";
  std::optional<std::string> api_key;
  OutputFormat output_format = OutputFormat::table;

  // Throws Error(validation) unless server_url is http://host[:port].
  void validate() const;
};

// `key = value` lines (server_url, api_key, output_format); '#' starts a
// comment. Missing file leaves `base` unchanged. Throws Error(validation).
CliConfig load_config_file(const std::filesystem::path& path, CliConfig base = {});
// $GRADEFORGE_CONFIG, else ~/.gradeforge.conf.
std::filesystem::path default_config_path();

// Per-test rows and a total; csv and structured carry the same data.
std::string format_report(const core::GradeReport& report, OutputFormat format);
// All StatusRow fields in every format. Table: whitespace-aligned columns,
// members joined by ';' and '-' for empty values. Structured: one JSON
// object per line.
std::string format_status(const std::vector<classroom::StatusRow>& rows, OutputFormat format);

// Entry point for the `gradeforge` binary; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gradeforge::cli
