#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gradeforge/core/test_suite.hpp"

namespace gradeforge::core {

enum class TestStatus { passed, failed, error, timeout };

std::string_view to_string(TestStatus s);
std::optional<TestStatus> test_status_from_string(std::string_view s);

struct TestResult {
  std::string test_name;
  TestStatus status = TestStatus::failed;
  std::string actual_stdout;
  std::string actual_stderr;
  std::int64_t duration_ms = 0;
  int points_earned = 0;
  // Set when the error came from the grading infrastructure (sandbox fault,
  // broken suite) rather than from the submission itself.
  bool grader_fault = false;
  // Short human-readable explanation of a non-pass ("setup command failed").
  std::string detail;

  bool operator==(const TestResult&) const = default;
};

struct GradeReport {
  std::vector<TestResult> results;
  int earned = 0;
  int max = 0;
  bool all_passed = false;

  bool has_grader_fault() const;
  bool operator==(const GradeReport&) const = default;
};

// Assembles a report. results[i] must belong to suite.tests()[i]; a length
// or name mismatch throws Error(internal). points_earned is recomputed from
// status: full points when passed, 0 otherwise.
GradeReport score(std::span<const TestResult> results, const TestSuite& suite);

nlohmann::json to_json(const TestResult& r);
nlohmann::json to_json(const GradeReport& r);
TestResult test_result_from_json(const nlohmann::json& j);
GradeReport grade_report_from_json(const nlohmann::json& j);

// Serializes JSON replacing invalid UTF-8 (program output is arbitrary bytes).
std::string dump_json(const nlohmann::json& j, int indent = -1);

}  // namespace gradeforge::core
