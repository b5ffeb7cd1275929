#include "gradeforge/sandbox/sandbox.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>
#include <sys/prctl.h>
#include <unistd.h>
#include <vector>

#include "gradeforge/error.hpp"
#include "gradeforge/sandbox/languages.hpp"
#include "gradeforge/util/hash.hpp"
#include "../support/proc_scan.hpp"

namespace gradeforge::sandbox {
namespace {

using namespace std::chrono_literals;

Sandbox& shared_sandbox() {
  static Sandbox sandbox = [] {
    auto opts = Sandbox::default_options();
    opts.max_concurrent = 8;
    return Sandbox(opts);
  }();
  return sandbox;
}

ExecLimits quick_limits() {
  ExecLimits l;
  l.wall_seconds = 10;
  l.cpu_seconds = 5;
  return l;
}

ExecResult run(const Workspace& ws, const std::string& cmd, ExecLimits limits = quick_limits(),
               std::map<std::string, std::string> env = {}) {
  ExecRequest req;
  req.command = cmd;
  req.workdir = ws.path();
  req.limits = limits;
  req.environment = std::move(env);
  return shared_sandbox().execute(req);
}

TEST(Limits, ValidateRejectsBadValues) {
  ExecLimits l;
  EXPECT_NO_THROW(l.validate());
  l.cpu_seconds = l.wall_seconds + 1;
  EXPECT_THROW(l.validate(), Error);
  l = ExecLimits{};
  l.memory_bytes = 0;
  EXPECT_THROW(l.validate(), Error);
}

TEST(Limits, DerivedFromTimeout) {
  auto l = limits_for_timeout(10);
  EXPECT_EQ(l.wall_seconds, 600);
  EXPECT_EQ(l.cpu_seconds, 10);
  EXPECT_EQ(l.memory_bytes, 512LL << 20);
  EXPECT_EQ(l.max_output_bytes, 1LL << 20);
  EXPECT_EQ(l.max_processes, 64);
  EXPECT_FALSE(l.network_allowed);
  EXPECT_EQ(limits_from_json(to_json(l), ExecLimits{}), l);
}

TEST(Workspace, ContainsExactlyGivenFiles) {
  auto ws = shared_sandbox().prepare_workspace(
      {{"average.py", "print(1)\n"}, {"iris.csv", "a,b\n"}, {"data/x.txt", "x"}});
  util::FileMap expected{{"average.py", "print(1)\n"}, {"iris.csv", "a,b\n"}, {"data/x.txt", "x"}};
  EXPECT_EQ(ws.files(), expected);
}

TEST(Workspace, EmptyMapIsValid) {
  auto ws = shared_sandbox().prepare_workspace({});
  EXPECT_TRUE(std::filesystem::is_directory(ws.path()));
  EXPECT_TRUE(ws.files().empty());
}

TEST(Workspace, TraversalRejected) {
  for (const char* bad : {"../escape.txt", "/etc/passwd", "a/../../b", "a//b", ""}) {
    try {
      shared_sandbox().prepare_workspace({{bad, "x"}});
      ADD_FAILURE() << "accepted " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::validation) << bad;
    }
  }
}

TEST(Workspace, RemovedOnDestruction) {
  std::filesystem::path p;
  {
    auto ws = shared_sandbox().prepare_workspace({{"a", "b"}});
    p = ws.path();
    EXPECT_TRUE(std::filesystem::exists(p));
  }
  EXPECT_FALSE(std::filesystem::exists(p));
}

TEST(Execute, EchoesToken) {
  auto ws = shared_sandbox().prepare_workspace({});
  std::string token = util::random_id();
  auto r = run(ws, "echo " + token);
  EXPECT_EQ(r.outcome, Outcome::ok);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.stdout_data, token + "\n");
  EXPECT_FALSE(r.truncated);
}

TEST(Execute, StdinDelivered) {
  auto ws = shared_sandbox().prepare_workspace({});
  ExecRequest req;
  req.command = "tr a-z A-Z";
  req.workdir = ws.path();
  req.stdin_data = "hello\n";
  req.limits = quick_limits();
  auto r = shared_sandbox().execute(req);
  EXPECT_EQ(r.outcome, Outcome::ok);
  EXPECT_EQ(r.stdout_data, "HELLO\n");
}

TEST(Execute, NonzeroExit) {
  auto ws = shared_sandbox().prepare_workspace({});
  auto r = run(ws, "echo oops >&2; exit 3");
  EXPECT_EQ(r.outcome, Outcome::nonzero_exit);
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(r.stderr_data, "oops\n");
}

TEST(Execute, CommandNotFoundIsNonzeroWithStderr) {
  auto ws = shared_sandbox().prepare_workspace({});
  auto r = run(ws, "definitely-not-a-command-xyz");
  EXPECT_EQ(r.outcome, Outcome::nonzero_exit);
  EXPECT_FALSE(r.stderr_data.empty());
}

TEST(Execute, InfiniteLoopTimesOutWithinGrace) {
  auto ws = shared_sandbox().prepare_workspace({});
  ExecLimits l = quick_limits();
  l.wall_seconds = 2;
  l.cpu_seconds = 2;
  auto start = std::chrono::steady_clock::now();
  auto r = run(ws, "while :; do :; done", l);
  auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(r.outcome, Outcome::timeout);
  EXPECT_LE(elapsed, 4s);
  EXPECT_LE(r.wall_ms, 4000);
}

TEST(Execute, SleepingProgramTimesOutOnWallClock) {
  auto ws = shared_sandbox().prepare_workspace({});
  ExecLimits l = quick_limits();
  l.wall_seconds = 2;
  l.cpu_seconds = 1;
  auto start = std::chrono::steady_clock::now();
  auto r = run(ws, "trap '' TERM; sleep 30", l);
  EXPECT_EQ(r.outcome, Outcome::timeout);
  EXPECT_LE(std::chrono::steady_clock::now() - start, 4s);
}

TEST(Execute, OutputCapIsExact) {
  auto ws = shared_sandbox().prepare_workspace({});
  ExecLimits l = quick_limits();
  l.max_output_bytes = 65536;
  // 10 MiB of known bytes.
  auto r = run(ws, "head -c 10485760 /dev/zero | tr '\\0' x", l);
  EXPECT_EQ(r.stdout_data.size(), 65536u);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.stdout_data.find_first_not_of('x'), std::string::npos);
  EXPECT_TRUE(r.outcome == Outcome::output_truncated_ok || r.outcome == Outcome::nonzero_exit)
      << to_string(r.outcome);
}

TEST(Execute, StderrCappedToo) {
  auto ws = shared_sandbox().prepare_workspace({});
  ExecLimits l = quick_limits();
  l.max_output_bytes = 1000;
  auto r = run(ws, "head -c 50000 /dev/zero | tr '\\0' e >&2", l);
  EXPECT_EQ(r.stderr_data.size(), 1000u);
  EXPECT_TRUE(r.truncated);
}

TEST(Execute, NoSurvivorsAfterBackgroundAndSetsid) {
  auto ws = shared_sandbox().prepare_workspace({});
  for (int i = 0; i < 5; ++i) {
    std::string marker = "GF_TEST_MARKER=" + util::random_id();
    auto eq = marker.find('=');
    auto r = run(ws, "sleep 60 & setsid sleep 60 & (sleep 60 &) ; echo started",
                 quick_limits(), {{marker.substr(0, eq), marker.substr(eq + 1)}});
    EXPECT_EQ(r.outcome, Outcome::ok);
    EXPECT_EQ(r.stdout_data, "started\n");
    EXPECT_TRUE(testing::processes_with_env_marker(marker).empty()) << marker;
  }
}

// Orphaned descendants become children of this process; none may be left
// as zombies counting against the sandbox user's process limit.
TEST(Execute, OrphanedDescendantsAreReaped) {
  auto ws = shared_sandbox().prepare_workspace({});
  for (int i = 0; i < 10; ++i) {
    run(ws, "sleep 60 & setsid sleep 60 & (sleep 60 &) ; (true &) ; echo started");
  }
  int zombies = 0;
  const std::string self = std::to_string(::getpid());
  for (const auto& e : std::filesystem::directory_iterator("/proc")) {
    std::ifstream in(e.path() / "stat");
    std::string line;
    if (!std::getline(in, line)) continue;
    auto paren = line.rfind(')');
    if (paren == std::string::npos) continue;
    std::istringstream rest(line.substr(paren + 1));
    std::string state, ppid;
    rest >> state >> ppid;
    if (state == "Z" && ppid == self) ++zombies;
  }
  EXPECT_EQ(zombies, 0);
  int subreaper = 0;
  ::prctl(PR_GET_CHILD_SUBREAPER, &subreaper);
  EXPECT_EQ(subreaper, 1);
}

TEST(Execute, NetworkDeniedByDefault) {
  if (!std::filesystem::exists("/usr/bin/python3")) GTEST_SKIP() << "python3 missing";
  auto ws = shared_sandbox().prepare_workspace({});
  auto r = run(ws,
               "python3 -c 'import socket\n"
               "try:\n"
               "    socket.socket(socket.AF_INET, socket.SOCK_STREAM)\n"
               "    print(\"open\")\n"
               "except OSError as e:\n"
               "    print(\"denied\")'");
  EXPECT_EQ(r.stdout_data, "denied\n") << r.stderr_data;

  ExecLimits open = quick_limits();
  open.network_allowed = true;
  r = run(ws,
          "python3 -c 'import socket; socket.socket(socket.AF_INET, socket.SOCK_STREAM); "
          "print(\"open\")'",
          open);
  EXPECT_EQ(r.stdout_data, "open\n") << r.stderr_data;
}

TEST(Execute, ForcedNetworkOffOverridesRequest) {
  if (!std::filesystem::exists("/usr/bin/python3")) GTEST_SKIP() << "python3 missing";
  auto opts = Sandbox::default_options();
  opts.force_network_off = true;
  Sandbox closed(opts);
  auto ws = closed.prepare_workspace({});
  ExecRequest req;
  req.command =
      "python3 -c 'import socket; socket.socket(socket.AF_INET, socket.SOCK_STREAM)'";
  req.workdir = ws.path();
  req.limits = quick_limits();
  req.limits.network_allowed = true;
  auto r = closed.execute(req);
  EXPECT_EQ(r.outcome, Outcome::nonzero_exit);
}

TEST(Execute, CannotWriteOutsideWorkspaceWhenUnprivileged) {
  if (geteuid() != 0) GTEST_SKIP() << "privilege drop needs root";
  auto ws = shared_sandbox().prepare_workspace({});
  // Root-owned, world-readable, not world-writable.
  auto outside = std::filesystem::temp_directory_path() / ("gf-outside-" + util::random_id());
  std::filesystem::create_directory(outside);
  std::filesystem::permissions(outside, std::filesystem::perms(0755));
  auto target = outside / "escape.txt";
  auto r = run(ws, "echo x > " + shell_quote(target.string()) + " && echo wrote");
  EXPECT_EQ(r.outcome, Outcome::nonzero_exit);
  EXPECT_FALSE(std::filesystem::exists(target));
  std::filesystem::remove_all(outside);
  r = run(ws, "echo x > inside.txt && cat inside.txt");
  EXPECT_EQ(r.stdout_data, "x\n");
}

TEST(Execute, MemoryLimitClassified) {
  if (!std::filesystem::exists("/usr/bin/python3")) GTEST_SKIP() << "python3 missing";
  auto ws = shared_sandbox().prepare_workspace({});
  ExecLimits l = quick_limits();
  l.memory_bytes = 256LL << 20;
  auto r = run(ws, "python3 -c 'x = bytearray(1 << 30); print(len(x))'", l);
  EXPECT_EQ(r.outcome, Outcome::memory_exceeded) << r.stderr_data;
}

TEST(Execute, InvalidLimitsRejected) {
  auto ws = shared_sandbox().prepare_workspace({});
  ExecLimits l = quick_limits();
  l.cpu_seconds = 100;
  EXPECT_THROW(run(ws, "true", l), Error);
}

TEST(Execute, ConcurrentIsolationTokens) {
  constexpr int kRuns = 100;
  std::vector<std::future<bool>> futures;
  for (int i = 0; i < kRuns; ++i) {
    futures.push_back(std::async(std::launch::async, [] {
      std::string token = util::random_id();
      auto ws = shared_sandbox().prepare_workspace({});
      auto r = run(ws, "echo " + token + " > out.txt; sleep 0.05; cat out.txt");
      return r.outcome == Outcome::ok && r.stdout_data == token + "\n";
    }));
  }
  int good = 0;
  for (auto& f : futures) good += f.get() ? 1 : 0;
  EXPECT_EQ(good, kRuns);
}

TEST(Execute, OkImpliesExitZero) {
  auto ws = shared_sandbox().prepare_workspace({});
  for (const char* cmd : {"true", "false", "exit 7", "echo hi", "kill -9 $$"}) {
    auto r = run(ws, cmd);
    if (r.outcome == Outcome::ok) {
      EXPECT_EQ(r.exit_code, 0) << cmd;
    }
    EXPECT_NE(r.outcome, Outcome::internal_error) << cmd;
  }
  auto killed = run(ws, "kill -9 $$");
  EXPECT_EQ(killed.outcome, Outcome::nonzero_exit);
  EXPECT_EQ(killed.exit_code, 128 + 9);
}

TEST(Languages, DefaultsContainRequiredIds) {
  auto reg = LanguageRegistry::defaults();
  for (const char* id : {"python3", "c", "cpp", "java"}) {
    EXPECT_NE(reg.find(id), nullptr) << id;
  }
  EXPECT_EQ(reg.list().front().id, "python3");
  EXPECT_FALSE(reg.find("python3")->compiled());
  EXPECT_TRUE(reg.find("c")->compiled());
  EXPECT_EQ(reg.find("java")->main_file, "Main.java");
  EXPECT_EQ(reg.find("java")->run_command(), "java -cp . Main");
  EXPECT_EQ(reg.find("python3")->run_command(), "python3 main.py");
}

TEST(Languages, EmptyAndDuplicateConfigs) {
  EXPECT_TRUE(LanguageRegistry::from_json("[]").list().empty());
  try {
    LanguageRegistry::from_json(R"([{"id":"a","extension":".a","run":"x"},
                                    {"id":"a","extension":".b","run":"y"}])");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_EQ(e.field(), "languages[1].id");
  }
  EXPECT_THROW(LanguageRegistry::from_json("{}"), Error);
  EXPECT_THROW(LanguageRegistry::from_json(R"([{"id":"a"}])"), Error);
}

TEST(Languages, ShippedConfigLoads) {
  auto reg = LanguageRegistry::load_file(GRADEFORGE_SOURCE_DIR "/config/languages.json");
  for (const char* id : {"python3", "c", "cpp", "java", "php", "octave"}) {
    EXPECT_NE(reg.find(id), nullptr) << id;
  }
}

TEST(Languages, CompileAndRunC) {
  if (!std::filesystem::exists("/usr/bin/gcc")) GTEST_SKIP() << "gcc missing";
  const auto reg = LanguageRegistry::defaults();
  const auto& c = *reg.find("c");
  auto ws = shared_sandbox().prepare_workspace(
      {{"main.c", "#include <stdio.h>\nint main(void){puts(\"hello world\");return 0;}\n"}});
  auto compiled = compile_if_needed(shared_sandbox(), c, ws, quick_limits());
  ASSERT_EQ(compiled.outcome, Outcome::ok) << compiled.stderr_data;
  EXPECT_TRUE(std::filesystem::exists(ws.path() / "main"));
  auto r = run(ws, c.run_command());
  EXPECT_EQ(r.outcome, Outcome::ok);
  EXPECT_EQ(r.stdout_data, "hello world\n");
}

TEST(Languages, CompileErrorSurfacesDiagnostics) {
  if (!std::filesystem::exists("/usr/bin/gcc")) GTEST_SKIP() << "gcc missing";
  const auto reg = LanguageRegistry::defaults();
  const auto& c = *reg.find("c");
  auto ws = shared_sandbox().prepare_workspace({{"main.c", "int main(void){return 0}\n"}});
  auto r = compile_if_needed(shared_sandbox(), c, ws, quick_limits());
  EXPECT_EQ(r.outcome, Outcome::nonzero_exit);
  EXPECT_FALSE(r.stderr_data.empty());
}

TEST(Languages, InterpretedNeedsNoCompile) {
  const auto reg = LanguageRegistry::defaults();
  const auto& py = *reg.find("python3");
  auto ws = shared_sandbox().prepare_workspace({{"main.py", "print(1)\n"}});
  auto r = compile_if_needed(shared_sandbox(), py, ws, quick_limits());
  EXPECT_EQ(r.outcome, Outcome::ok);
  EXPECT_EQ(r.wall_ms, 0);
  EXPECT_TRUE(r.stdout_data.empty());
  EXPECT_EQ(ws.files().size(), 1u);
}

}  // namespace
}  // namespace gradeforge::sandbox
