#include "gradeforge/engine/grader.hpp"

#include <algorithm>

#include "gradeforge/core/compare.hpp"
#include "gradeforge/error.hpp"

namespace gradeforge::engine {

using core::TestResult;
using core::TestStatus;
using sandbox::ExecResult;
using sandbox::Outcome;

namespace {

std::string exit_description(const ExecResult& r) {
  if (r.exit_code) return "exit code " + std::to_string(*r.exit_code);
  return std::string(to_string(r.outcome));
}

// Workspace directories have random names; replace them so that reports of
// identical submissions are identical.
std::string relativize(std::string text, const std::string& dir) {
  for (auto [from, to] : {std::pair{dir + "/", std::string()}, std::pair{dir, std::string(".")}}) {
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
      text.replace(pos, from.size(), to);
    }
  }
  return text;
}

TestResult fault(const core::TestCase& test, std::string detail, const ExecResult* r = nullptr) {
  TestResult t;
  t.test_name = test.name;
  t.status = TestStatus::error;
  t.grader_fault = true;
  t.detail = std::move(detail);
  if (r) {
    t.actual_stdout = r->stdout_data;
    t.actual_stderr = r->stderr_data;
    t.duration_ms = r->wall_ms;
  }
  return t;
}

}  // namespace

Grader::Grader(sandbox::Sandbox& sandbox, GradingPolicy policy, PackageCache* cache,
               const sandbox::LanguageRegistry* languages)
    : sandbox_(sandbox), policy_(policy), cache_(cache), languages_(languages) {}

sandbox::ExecLimits Grader::limits_for(const core::TestCase& test, bool network) const {
  sandbox::ExecLimits l = policy_.limits;
  l.wall_seconds = static_cast<std::int64_t>(test.timeout_minutes) * 60;
  l.cpu_seconds = std::min(policy_.limits.cpu_seconds, l.wall_seconds);
  l.network_allowed = network;
  return l;
}

std::map<std::string, std::string> Grader::environment_for(const SetupPlan& plan) {
  if (!cache_ || plan.packages.empty()) return {};
  auto dir = cache_->warm(plan.packages, policy_.setup_network);
  return {{"PYTHONPATH", dir.string()}};
}

void Grader::warm_packages(const core::TestSuite& suite) {
  if (!cache_) return;
  for (const auto& t : suite.tests()) {
    if (!t.setup_command) continue;
    auto plan = plan_setup(*t.setup_command, policy_.packages);
    if (!plan.packages.empty()) cache_->warm(plan.packages, policy_.setup_network);
  }
}

TestResult Grader::run_test(const sandbox::Workspace& workspace, const core::TestCase& test,
                            SetupMemo& memo) {
  TestResult result = run_test_raw(workspace, test, memo);
  const std::string dir = workspace.path().string();
  result.actual_stdout = relativize(std::move(result.actual_stdout), dir);
  result.actual_stderr = relativize(std::move(result.actual_stderr), dir);
  return result;
}

TestResult Grader::run_test_raw(const sandbox::Workspace& workspace, const core::TestCase& test,
                                SetupMemo& memo) {
  TestResult result;
  result.test_name = test.name;
  std::map<std::string, std::string> env;
  std::int64_t setup_ms = 0;

  try {
    if (test.setup_command) {
      auto plan = plan_setup(*test.setup_command, policy_.packages);
      env = environment_for(plan);
      auto it = memo.find(*test.setup_command);
      if (it == memo.end()) {
        sandbox::ExecRequest req;
        req.command = plan.command;
        req.workdir = workspace.path();
        req.limits = limits_for(test, policy_.setup_network);
        req.limits.cpu_seconds = req.limits.wall_seconds;
        req.environment = env;
        it = memo.emplace(*test.setup_command, sandbox_.execute(req)).first;
        setup_ms = it->second.wall_ms;
      }
      const ExecResult& setup = it->second;
      if (setup.outcome == Outcome::internal_error) {
        return fault(test, "sandbox failure during setup: " + setup.stderr_data, &setup);
      }
      if (!setup.clean_exit()) {
        result.status = TestStatus::error;
        result.detail = "setup command failed (" + exit_description(setup) + ")";
        result.actual_stdout = setup.stdout_data;
        result.actual_stderr = setup.stderr_data;
        result.duration_ms = setup_ms;
        return result;
      }
    }

    sandbox::ExecRequest req;
    req.command = test.run_command;
    req.workdir = workspace.path();
    req.stdin_data = test.stdin_data;
    req.limits = limits_for(test, policy_.run_network);
    req.environment = env;
    ExecResult run = sandbox_.execute(req);
    if (run.outcome == Outcome::internal_error) {
      return fault(test, "sandbox failure: " + run.stderr_data, &run);
    }
    result.actual_stdout = run.stdout_data;
    result.actual_stderr = run.stderr_data;
    result.duration_ms = setup_ms + run.wall_ms;
    switch (run.outcome) {
      case Outcome::timeout:
        result.status = TestStatus::timeout;
        result.detail = "time limit exceeded";
        return result;
      case Outcome::memory_exceeded:
        result.status = TestStatus::failed;
        result.detail = "memory limit exceeded";
        return result;
      case Outcome::nonzero_exit:
        result.status = TestStatus::failed;
        result.detail = "program exited with " + exit_description(run);
        return result;
      default:
        break;
    }
    if (!test.expected_output) {
      result.status = TestStatus::passed;
    } else if (core::compare_output(*test.expected_output, run.stdout_data, test.comparison)) {
      result.status = TestStatus::passed;
    } else {
      result.status = TestStatus::failed;
      result.detail = "output did not match (" + std::string(to_string(test.comparison)) + ")";
    }
  } catch (const Error& e) {
    TestResult f = fault(test, e.what());
    f.actual_stdout = std::move(result.actual_stdout);
    f.actual_stderr = std::move(result.actual_stderr);
    f.duration_ms = result.duration_ms;
    return f;
  }
  if (result.status == TestStatus::passed) result.points_earned = test.points;
  return result;
}

core::GradeReport Grader::grade_submission(const util::FileMap& files,
                                           const core::TestSuite& suite,
                                           const std::optional<std::string>& language_hint) {
  sandbox::Workspace workspace = [&] {
    try {
      return sandbox_.prepare_workspace(files);
    } catch (const Error& e) {
      throw Error(ErrorKind::internal, std::string("workspace preparation failed: ") + e.what());
    }
  }();
  std::vector<TestResult> results;
  results.reserve(suite.tests().size());

  if (language_hint && languages_) {
    const auto* lang = languages_->find(*language_hint);
    if (lang && lang->compiled()) {
      ExecResult compiled;
      try {
        compiled = sandbox::compile_if_needed(sandbox_, *lang, workspace, policy_.limits);
      } catch (const Error& e) {
        compiled.outcome = Outcome::nonzero_exit;
        compiled.stderr_data = e.what();
      }
      if (!compiled.clean_exit()) {
        for (const auto& t : suite.tests()) {
          TestResult r;
          r.test_name = t.name;
          r.grader_fault = compiled.outcome == Outcome::internal_error;
          r.status = r.grader_fault ? TestStatus::error : TestStatus::failed;
          r.detail = "compilation failed";
          r.actual_stdout = compiled.stdout_data;
          r.actual_stderr = relativize(compiled.stderr_data, workspace.path().string());
          results.push_back(std::move(r));
        }
        return core::score(results, suite);
      }
    }
  }

  SetupMemo memo;
  for (const auto& test : suite.tests()) results.push_back(run_test(workspace, test, memo));
  return core::score(results, suite);
}

}  // namespace gradeforge::engine
