#include "gradeforge/core/report.hpp"

#include "gradeforge/error.hpp"

namespace gradeforge::core {

using nlohmann::json;

std::string_view to_string(TestStatus s) {
  switch (s) {
    case TestStatus::passed: return "passed";
    case TestStatus::failed: return "failed";
    case TestStatus::error: return "error";
    case TestStatus::timeout: return "timeout";
  }
  return "error";
}

std::optional<TestStatus> test_status_from_string(std::string_view s) {
  if (s == "passed") return TestStatus::passed;
  if (s == "failed") return TestStatus::failed;
  if (s == "error") return TestStatus::error;
  if (s == "timeout") return TestStatus::timeout;
  return std::nullopt;
}

bool GradeReport::has_grader_fault() const {
  for (const auto& r : results) {
    if (r.grader_fault) return true;
  }
  return false;
}

GradeReport score(std::span<const TestResult> results, const TestSuite& suite) {
  const auto& tests = suite.tests();
  if (results.size() != tests.size()) {
    throw Error(ErrorKind::internal,
                "score: " + std::to_string(results.size()) + " results for " +
                    std::to_string(tests.size()) + " tests");
  }
  GradeReport report;
  report.max = suite.max_points();
  report.all_passed = true;
  report.results.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].test_name != tests[i].name) {
      throw Error(ErrorKind::internal,
                  "score: result '" + results[i].test_name +
                      "' does not match test '" + tests[i].name + "'");
    }
    TestResult r = results[i];
    r.points_earned = r.status == TestStatus::passed ? tests[i].points : 0;
    report.earned += r.points_earned;
    report.all_passed = report.all_passed && r.status == TestStatus::passed;
    report.results.push_back(std::move(r));
  }
  return report;
}

json to_json(const TestResult& r) {
  return json{{"test_name", r.test_name},
              {"status", std::string(to_string(r.status))},
              {"actual_stdout", r.actual_stdout},
              {"actual_stderr", r.actual_stderr},
              {"duration_ms", r.duration_ms},
              {"points_earned", r.points_earned},
              {"grader_fault", r.grader_fault},
              {"detail", r.detail}};
}

json to_json(const GradeReport& r) {
  json results = json::array();
  for (const auto& t : r.results) results.push_back(to_json(t));
  return json{{"results", std::move(results)},
              {"earned", r.earned},
              {"max", r.max},
              {"all_passed", r.all_passed}};
}

TestResult test_result_from_json(const json& j) {
  TestResult r;
  r.test_name = j.at("test_name").get<std::string>();
  auto status = test_status_from_string(j.at("status").get<std::string>());
  if (!status) throw Error(ErrorKind::validation, "unknown test status", "status");
  r.status = *status;
  r.actual_stdout = j.value("actual_stdout", "");
  r.actual_stderr = j.value("actual_stderr", "");
  r.duration_ms = j.value("duration_ms", std::int64_t{0});
  r.points_earned = j.value("points_earned", 0);
  r.grader_fault = j.value("grader_fault", false);
  r.detail = j.value("detail", "");
  return r;
}

GradeReport grade_report_from_json(const json& j) {
  GradeReport r;
  for (const auto& t : j.at("results")) r.results.push_back(test_result_from_json(t));
  r.earned = j.at("earned").get<int>();
  r.max = j.at("max").get<int>();
  r.all_passed = j.at("all_passed").get<bool>();
  return r;
}

std::string dump_json(const json& j, int indent) {
  return j.dump(indent, ' ', false, json::error_handler_t::replace);
}

}  // namespace gradeforge::core
