#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <sys/types.h>

#include "gradeforge/sandbox/limits.hpp"
#include "gradeforge/util/files.hpp"

namespace gradeforge::sandbox {

enum class Outcome {
  ok,
  nonzero_exit,
  timeout,
  memory_exceeded,
  output_truncated_ok,
  internal_error,
};

std::string_view to_string(Outcome o);

struct ExecResult {
  Outcome outcome = Outcome::internal_error;
  std::optional<int> exit_code;
  std::string stdout_data;
  std::string stderr_data;
  std::int64_t wall_ms = 0;
  bool truncated = false;

  // ok or output_truncated_ok
  bool clean_exit() const {
    return outcome == Outcome::ok || outcome == Outcome::output_truncated_ok;
  }
};

nlohmann::json to_json(const ExecResult& r);

struct Identity {
  uid_t uid;
  gid_t gid;
};

// Private working directory for one job. Removed on destruction.
class Workspace {
 public:
  Workspace(Workspace&& other) noexcept;
  Workspace& operator=(Workspace&& other) noexcept;
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
  ~Workspace();

  const std::filesystem::path& path() const { return path_; }
  // Current regular files, relative path -> bytes.
  util::FileMap files() const;
  // Adds or overwrites files; paths are validated like prepare_workspace.
  void write(const util::FileMap& files);

 private:
  friend class Sandbox;
  Workspace(std::filesystem::path path, std::optional<Identity> owner);

  std::filesystem::path path_;
  std::optional<Identity> owner_;
};

struct ExecRequest {
  std::string command;  // run through /bin/sh -c
  std::filesystem::path workdir;
  std::optional<std::string> stdin_data;
  ExecLimits limits;
  // Merged over the sandbox's minimal default environment.
  std::map<std::string, std::string> environment;
};

// Runs untrusted commands as child processes with a private working
// directory, rlimits (CPU, address space, processes, file size), an optional
// unprivileged identity, and a seccomp filter denying IP sockets when the
// network is off. The whole process tree is killed before execute returns.
class Sandbox {
 public:
  struct Options {
    // Parent of all workspaces; GRADEFORGE_SANDBOX_ROOT or <tmp>/gradeforge-sandbox.
    std::filesystem::path root;
    // Admission cap on simultaneously running children.
    unsigned max_concurrent = 0;  // 0 = hardware concurrency
    // Identity children run as. Defaults to "nobody" when started as root.
    std::optional<Identity> run_as;
    bool drop_privileges = true;
    std::chrono::milliseconds grace{2000};
    // Intranet mode: deny network for every execution regardless of request.
    bool force_network_off = false;
  };

  static Options default_options();

  Sandbox();
  explicit Sandbox(Options options);

  // Fresh directory containing exactly `files`. Throws Error(validation) for
  // unsafe paths, Error(internal) when the filesystem fails.
  Workspace prepare_workspace(const util::FileMap& files) const;

  // Makes an existing directory usable by sandboxed children.
  void grant_access(const std::filesystem::path& dir) const;

  // Blocks on the admission semaphore, then runs the command. Setup failures
  // are reported as Outcome::internal_error, never as a student failure.
  ExecResult execute(const ExecRequest& request);

  const Options& options() const { return options_; }
  unsigned max_concurrent() const { return options_.max_concurrent; }

 private:
  ExecResult run_child(const ExecRequest& request);

  Options options_;
  std::unique_ptr<std::counting_semaphore<>> admission_;
};

// Single-quotes `s` for /bin/sh.
std::string shell_quote(std::string_view s);

}  // namespace gradeforge::sandbox
