#include "gradeforge/core/test_suite.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "gradeforge/error.hpp"

namespace gradeforge::core {

using nlohmann::json;

std::string_view to_string(Comparison c) {
  switch (c) {
    case Comparison::included: return "included";
    case Comparison::exact: return "exact";
    case Comparison::regex: return "regex";
  }
  return "included";
}

std::optional<Comparison> comparison_from_string(std::string_view s) {
  if (s == "included") return Comparison::included;
  if (s == "exact") return Comparison::exact;
  if (s == "regex") return Comparison::regex;
  return std::nullopt;
}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::suite, field + ": " + what, field);
}

}  // namespace

TestSuite::TestSuite(std::vector<TestCase> tests) : tests_(std::move(tests)) {
  if (tests_.empty()) fail("tests", "empty test list");
  std::set<std::string> names;
  long total = 0;
  for (std::size_t i = 0; i < tests_.size(); ++i) {
    const TestCase& t = tests_[i];
    std::string at = "tests[" + std::to_string(i) + "].";
    if (t.name.empty()) fail(at + "name", "must be a non-empty string");
    if (!names.insert(t.name).second) {
      fail(at + "name", "duplicate test name '" + t.name + "'");
    }
    if (t.run_command.empty()) fail(at + "run", "must be a non-empty command");
    if (t.timeout_minutes < 1) fail(at + "timeout", "must be at least 1 minute");
    if (t.points < 0) fail(at + "points", "negative points");
    total += t.points;
    if (total > std::numeric_limits<int>::max()) {
      fail(at + "points", "point total overflows");
    }
  }
  max_points_ = static_cast<int>(total);
}

namespace {

std::optional<std::string> optional_string(const json& obj, const char* key,
                                           const std::string& at) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail(at + key, "must be a string");
  return it->get<std::string>();
}

int integer_field(const json& value, const std::string& field) {
  if (value.is_number_integer()) {
    auto v = value.get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() ||
        v > std::numeric_limits<int>::max()) {
      fail(field, "out of range");
    }
    return static_cast<int>(v);
  }
  if (value.is_number_float()) {
    double d = value.get<double>();
    if (std::trunc(d) != d) fail(field, "must be an integer, got a fraction");
    fail(field, "must be written as an integer");
  }
  fail(field, "must be an integer");
}

TestCase parse_test(const json& obj, std::size_t index) {
  std::string at = "tests[" + std::to_string(index) + "].";
  if (!obj.is_object()) fail("tests[" + std::to_string(index) + "]", "must be an object");
  static const std::set<std::string> known = {
      "name", "setup", "run", "input", "output", "comparison", "timeout", "points"};
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) fail(at + key, "unknown key");
  }
  TestCase t;
  auto name = optional_string(obj, "name", at);
  if (!name) fail(at + "name", "missing required key");
  t.name = *name;
  t.setup_command = optional_string(obj, "setup", at);
  auto run = optional_string(obj, "run", at);
  if (!run) fail(at + "run", "missing required key");
  t.run_command = *run;
  t.stdin_data = optional_string(obj, "input", at);
  t.expected_output = optional_string(obj, "output", at);
  if (auto cmp = optional_string(obj, "comparison", at)) {
    auto mode = comparison_from_string(*cmp);
    if (!mode) {
      fail(at + "comparison", "unknown comparison '" + *cmp +
                                  "' (expected included, exact or regex)");
    }
    t.comparison = *mode;
  }
  if (auto it = obj.find("timeout"); it != obj.end() && !it->is_null()) {
    t.timeout_minutes = integer_field(*it, at + "timeout");
  }
  auto pts = obj.find("points");
  if (pts == obj.end() || pts->is_null()) fail(at + "points", "missing required key");
  t.points = integer_field(*pts, at + "points");
  return t;
}

}  // namespace

TestSuite parse_suite(std::string_view spec_text) {
  json doc;
  try {
    doc = json::parse(spec_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::suite, std::string("malformed document: ") + e.what(),
                "document");
  }
  if (!doc.is_object()) fail("document", "malformed document: top level must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "tests") fail(key, "unknown key");
  }
  auto tests = doc.find("tests");
  if (tests == doc.end()) fail("tests", "missing required key");
  if (!tests->is_array()) fail("tests", "must be an array");
  std::vector<TestCase> cases;
  cases.reserve(tests->size());
  for (std::size_t i = 0; i < tests->size(); ++i) {
    cases.push_back(parse_test((*tests)[i], i));
  }
  return TestSuite(std::move(cases));
}

std::string serialize_suite(const TestSuite& suite) {
  json tests = json::array();
  for (const TestCase& t : suite.tests()) {
    json obj = json::object();
    obj["name"] = t.name;
    if (t.setup_command) obj["setup"] = *t.setup_command;
    obj["run"] = t.run_command;
    if (t.stdin_data) obj["input"] = *t.stdin_data;
    if (t.expected_output) obj["output"] = *t.expected_output;
    obj["comparison"] = std::string(to_string(t.comparison));
    obj["timeout"] = t.timeout_minutes;
    obj["points"] = t.points;
    tests.push_back(std::move(obj));
  }
  return json{{"tests", std::move(tests)}}.dump(2) + "\n";
}

}  // namespace gradeforge::core
