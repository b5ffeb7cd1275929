#pragma once

#include <map>
#include <optional>
#include <string>

#include "gradeforge/core/report.hpp"
#include "gradeforge/core/test_suite.hpp"
#include "gradeforge/engine/setup.hpp"
#include "gradeforge/sandbox/languages.hpp"
#include "gradeforge/sandbox/sandbox.hpp"

namespace gradeforge::engine {

struct GradingPolicy {
  bool setup_network = true;
  bool run_network = false;
  PackageMode packages = PackageMode::cached;
  // Wall time comes from each test's timeout; the other limits from here.
  sandbox::ExecLimits limits;
};

// Results of setup commands already executed in this grading run, keyed by
// the original command text.
using SetupMemo = std::map<std::string, sandbox::ExecResult>;

class Grader {
 public:
  Grader(sandbox::Sandbox& sandbox, GradingPolicy policy, PackageCache* cache = nullptr,
         const sandbox::LanguageRegistry* languages = nullptr);

  // Setup (memoized through `memo`), run, compare. Never throws for
  // submission or sandbox failures; they become the result status.
  core::TestResult run_test(const sandbox::Workspace& workspace, const core::TestCase& test,
                            SetupMemo& memo);

  // Fresh workspace for `files`, tests in suite order sharing it. A compiled
  // language_hint compiles first; a compile error fails every test with the
  // diagnostics. Throws Error(internal) if the workspace cannot be prepared.
  core::GradeReport grade_submission(const util::FileMap& files, const core::TestSuite& suite,
                                     const std::optional<std::string>& language_hint = {});

  // Installs or locates the packages the suite's setup commands need.
  void warm_packages(const core::TestSuite& suite);

  sandbox::Sandbox& sandbox() { return sandbox_; }
  const GradingPolicy& policy() const { return policy_; }

 private:
  core::TestResult run_test_raw(const sandbox::Workspace& workspace, const core::TestCase& test,
                                SetupMemo& memo);
  sandbox::ExecLimits limits_for(const core::TestCase& test, bool network) const;
  std::map<std::string, std::string> environment_for(const SetupPlan& plan);

  sandbox::Sandbox& sandbox_;
  GradingPolicy policy_;
  PackageCache* cache_;
  const sandbox::LanguageRegistry* languages_;
};

}  // namespace gradeforge::engine
