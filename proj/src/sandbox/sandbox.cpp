#include "gradeforge/sandbox/sandbox.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <grp.h>
#include <linux/audit.h>
#include <linux/filter.h>
#include <linux/seccomp.h>
#include <poll.h>
#include <pwd.h>
#include <signal.h>
#include <stddef.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <thread>
#include <vector>

#include "gradeforge/error.hpp"
#include "gradeforge/util/hash.hpp"

namespace gradeforge::sandbox {

namespace fs = std::filesystem;
using Steady = std::chrono::steady_clock;
using std::chrono::milliseconds;

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::ok: return "ok";
    case Outcome::nonzero_exit: return "nonzero_exit";
    case Outcome::timeout: return "timeout";
    case Outcome::memory_exceeded: return "memory_exceeded";
    case Outcome::output_truncated_ok: return "output_truncated_ok";
    case Outcome::internal_error: return "internal_error";
  }
  return "internal_error";
}

nlohmann::json to_json(const ExecResult& r) {
  return {{"outcome", std::string(to_string(r.outcome))},
          {"exit_code", r.exit_code ? nlohmann::json(*r.exit_code) : nlohmann::json()},
          {"stdout", r.stdout_data},
          {"stderr", r.stderr_data},
          {"wall_ms", r.wall_ms},
          {"truncated", r.truncated}};
}

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

namespace {

constexpr const char* kTokenVar = "GRADEFORGE_SANDBOX_TOKEN";
constexpr rlim_t kMaxFileBytes = rlim_t{256} << 20;
constexpr milliseconds kPoll{20};
constexpr milliseconds kDrain{250};
// The hard kill lands this much before wall + grace so that execute always
// returns inside that bound.
constexpr milliseconds kKillMargin{250};

void chown_tree(const fs::path& dir, const Identity& id) {
  if (::lchown(dir.c_str(), id.uid, id.gid) != 0) {
    throw Error(ErrorKind::internal, "chown failed for " + dir.string());
  }
  if (!fs::is_directory(dir)) return;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (::lchown(entry.path().c_str(), id.uid, id.gid) != 0) {
      throw Error(ErrorKind::internal, "chown failed for " + entry.path().string());
    }
  }
}

// Denies socket(AF_INET|AF_INET6, ...) with EACCES. Unix sockets stay usable.
struct NetworkFilter {
  std::array<sock_filter, 10> code;
  sock_fprog prog;

  NetworkFilter() {
#if defined(__x86_64__)
    constexpr std::uint32_t kArch = AUDIT_ARCH_X86_64;
#elif defined(__aarch64__)
    constexpr std::uint32_t kArch = AUDIT_ARCH_AARCH64;
#else
#error "unsupported architecture for the seccomp network filter"
#endif
    code = {{
        BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, arch)),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, kArch, 1, 0),
        BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS),
        BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, nr)),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, __NR_socket, 0, 3),
        BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, args[0])),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, AF_INET, 2, 0),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, AF_INET6, 1, 0),
        BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ALLOW),
        BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ERRNO | (EACCES & SECCOMP_RET_DATA)),
    }};
    prog.len = static_cast<unsigned short>(code.size());
    prog.filter = code.data();
  }
};

struct Pipe {
  int read = -1;
  int write = -1;

  bool open() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) return false;
    read = fds[0];
    write = fds[1];
    return true;
  }
  static void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
  ~Pipe() {
    close_fd(read);
    close_fd(write);
  }
};

// Reported by the child through the status pipe when setup fails before exec.
struct ChildFailure {
  int stage;
  int err;
};

enum Stage { kStageChdir = 1, kStageIdentity, kStageLimits, kStageSeccomp, kStageExec };

const char* stage_name(int stage) {
  switch (stage) {
    case kStageChdir: return "chdir";
    case kStageIdentity: return "drop privileges";
    case kStageLimits: return "resource limits";
    case kStageSeccomp: return "seccomp filter";
    case kStageExec: return "exec /bin/sh";
  }
  return "setup";
}

[[noreturn]] void child_fail(int fd, int stage) {
  ChildFailure f{stage, errno};
  ssize_t ignored = ::write(fd, &f, sizeof f);
  (void)ignored;
  ::_exit(127);
}

void set_nonblocking(int fd) {
  int flags = ::fcntl(fd, F_GETFL);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

// Kills every process whose initial environment carries `token`. Catches
// descendants that left the process group via setsid(). Killed pids are
// added to `killed`.
void sweep_token(const std::string& token, int sig, std::vector<pid_t>& killed) {
  const std::string needle = std::string(kTokenVar) + "=" + token;
  for (int round = 0; round < 4; ++round) {
    bool found = false;
    DIR* proc = ::opendir("/proc");
    if (!proc) return;
    while (dirent* e = ::readdir(proc)) {
      char* end = nullptr;
      long pid = std::strtol(e->d_name, &end, 10);
      if (*end != '\0' || pid <= 0 || pid == ::getpid()) continue;
      std::string path = std::string("/proc/") + e->d_name + "/environ";
      int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
      if (fd < 0) continue;
      std::string env;
      char buf[4096];
      ssize_t n;
      while ((n = ::read(fd, buf, sizeof buf)) > 0) env.append(buf, std::size_t(n));
      ::close(fd);
      std::size_t pos = 0;
      while (pos < env.size()) {
        std::size_t z = env.find('\0', pos);
        if (z == std::string::npos) z = env.size();
        if (env.compare(pos, z - pos, needle) == 0) {
          ::kill(pid_t(pid), sig);
          if (std::find(killed.begin(), killed.end(), pid_t(pid)) == killed.end()) killed.push_back(pid_t(pid));
          found = true;
          break;
        }
        pos = z + 1;
      }
    }
    ::closedir(proc);
    if (!found || sig != SIGKILL) return;
    std::this_thread::sleep_for(milliseconds(5));
  }
}

struct ProcStat {
  char state = 0;
  pid_t ppid = 0;
  pid_t pgrp = 0;
};

std::optional<ProcStat> read_stat(pid_t pid) {
  int fd = ::open(("/proc/" + std::to_string(pid) + "/stat").c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) return std::nullopt;
  char buf[512];
  ssize_t n = ::read(fd, buf, sizeof buf - 1);
  ::close(fd);
  if (n <= 0) return std::nullopt;
  buf[n] = '\0';
  char* paren = std::strrchr(buf, ')');
  if (!paren) return std::nullopt;
  ProcStat st;
  int ppid = 0, pgrp = 0;
  if (std::sscanf(paren + 1, " %c %d %d", &st.state, &ppid, &pgrp) != 3) return std::nullopt;
  st.ppid = ppid;
  st.pgrp = pgrp;
  return st;
}

// Descendants of a run are reparented to this process (a child subreaper)
// when their parents die. Zombies among them still count against the
// sandbox user's process limit, so they are reaped here: the swept pids,
// plus any zombie child still in the run's process group. `leader` itself
// is waited for by the caller.
void reap_orphans(std::vector<pid_t> pending, pid_t leader) {
  const pid_t self = ::getpid();
  auto reap_group = [&] {
    DIR* proc = ::opendir("/proc");
    if (!proc) return;
    while (dirent* e = ::readdir(proc)) {
      char* end = nullptr;
      long pid = std::strtol(e->d_name, &end, 10);
      if (*end != '\0' || pid <= 0 || pid_t(pid) == leader) continue;
      auto st = read_stat(pid_t(pid));
      if (st && st->state == 'Z' && st->ppid == self && st->pgrp == leader) ::waitpid(pid_t(pid), nullptr, WNOHANG);
    }
    ::closedir(proc);
  };
  for (int round = 0; round < 200 && !pending.empty(); ++round) {
    std::vector<pid_t> next;
    for (pid_t pid : pending) {
      auto st = read_stat(pid);
      if (!st) continue;
      if (st->ppid == self && st->state == 'Z') {
        ::waitpid(pid, nullptr, WNOHANG);
      } else if (st->ppid == self || st->state != 'Z') {
        next.push_back(pid);
      }
    }
    pending.swap(next);
    if (!pending.empty()) std::this_thread::sleep_for(milliseconds(1));
  }
  reap_group();
}

bool contains_memory_marker(const std::string& err) {
  static const char* markers[] = {"MemoryError", "std::bad_alloc", "Cannot allocate memory",
                                  "out of memory", "OutOfMemoryError"};
  return std::any_of(std::begin(markers), std::end(markers),
                     [&](const char* m) { return err.find(m) != std::string::npos; });
}

}  // namespace

// --- Workspace ---

Workspace::Workspace(fs::path path, std::optional<Identity> owner)
    : path_(std::move(path)), owner_(owner) {}

Workspace::Workspace(Workspace&& other) noexcept
    : path_(std::exchange(other.path_, {})), owner_(other.owner_) {}

Workspace& Workspace::operator=(Workspace&& other) noexcept {
  if (this != &other) {
    std::error_code ec;
    if (!path_.empty()) fs::remove_all(path_, ec);
    path_ = std::exchange(other.path_, {});
    owner_ = other.owner_;
  }
  return *this;
}

Workspace::~Workspace() {
  if (path_.empty()) return;
  std::error_code ec;
  fs::remove_all(path_, ec);
}

util::FileMap Workspace::files() const { return util::read_tree(path_); }

void Workspace::write(const util::FileMap& files) {
  util::FileMap checked;
  for (const auto& [path, data] : files) {
    std::string rel = util::checked_relative_path(path);
    if (!checked.emplace(rel, data).second) {
      throw Error(ErrorKind::validation, "duplicate path '" + rel + "'", "path");
    }
  }
  for (const auto& [rel, data] : checked) util::write_file(path_ / rel, data);
  if (owner_) chown_tree(path_, *owner_);
}

// --- Sandbox ---

Sandbox::Options Sandbox::default_options() {
  Options o;
  if (const char* root = std::getenv("GRADEFORGE_SANDBOX_ROOT"); root && *root) {
    o.root = root;
  } else {
    o.root = fs::temp_directory_path() / "gradeforge-sandbox";
  }
  return o;
}

Sandbox::Sandbox() : Sandbox(default_options()) {}

Sandbox::Sandbox(Options options) : options_(std::move(options)) {
  if (options_.root.empty()) options_.root = default_options().root;
  if (options_.max_concurrent == 0) {
    options_.max_concurrent = std::max(1u, std::thread::hardware_concurrency());
  }
  if (!options_.run_as && options_.drop_privileges && ::geteuid() == 0) {
    if (passwd* pw = ::getpwnam("nobody")) options_.run_as = Identity{pw->pw_uid, pw->pw_gid};
  }
  if (!options_.drop_privileges) options_.run_as.reset();
  std::error_code ec;
  fs::create_directories(options_.root, ec);
  if (ec) {
    throw Error(ErrorKind::config, "cannot create sandbox root " + options_.root.string());
  }
  // Children must be able to traverse into their own workspace.
  fs::permissions(options_.root, fs::perms::owner_all | fs::perms::group_exec |
                                     fs::perms::others_exec, ec);
  admission_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(options_.max_concurrent));
  // Writes to a child's stdin must not kill the service when the child exits.
  ::signal(SIGPIPE, SIG_IGN);
  ::prctl(PR_SET_CHILD_SUBREAPER, 1);
}

Workspace Sandbox::prepare_workspace(const util::FileMap& files) const {
  util::FileMap checked;
  for (const auto& [path, data] : files) {
    std::string rel = util::checked_relative_path(path);
    if (!checked.emplace(rel, data).second) {
      throw Error(ErrorKind::validation, "duplicate path '" + rel + "'", "path");
    }
  }
  std::string tmpl = (options_.root / "ws-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) {
    throw Error(ErrorKind::internal, "cannot create workspace under " + options_.root.string() +
                                         ": " + std::strerror(errno));
  }
  Workspace ws(tmpl, options_.run_as);
  for (const auto& [rel, data] : checked) util::write_file(ws.path() / rel, data);
  if (options_.run_as) chown_tree(ws.path(), *options_.run_as);
  return ws;
}

void Sandbox::grant_access(const fs::path& dir) const {
  if (options_.run_as) chown_tree(dir, *options_.run_as);
}

ExecResult Sandbox::execute(const ExecRequest& request) {
  request.limits.validate();
  if (request.command.empty()) {
    throw Error(ErrorKind::validation, "command must be non-empty", "command");
  }
  if (!fs::is_directory(request.workdir)) {
    throw Error(ErrorKind::validation, "workspace does not exist: " + request.workdir.string(),
                "workspace");
  }
  admission_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{admission_.get()};
  return run_child(request);
}

ExecResult Sandbox::run_child(const ExecRequest& request) {
  ExecResult result;
  const ExecLimits& lim = request.limits;
  const bool network = lim.network_allowed && !options_.force_network_off;
  const std::string token = util::random_id();

  std::map<std::string, std::string> env = {
      {"PATH", "/usr/local/bin:/usr/bin:/bin"},
      {"HOME", request.workdir.string()},
      {"TMPDIR", request.workdir.string()},
      {"LANG", "C.UTF-8"},
      {"LC_ALL", "C.UTF-8"},
      {"OMP_NUM_THREADS", "1"},
      {"OPENBLAS_NUM_THREADS", "1"},
      {"PYTHONDONTWRITEBYTECODE", "1"},
  };
  for (const auto& [k, v] : request.environment) env[k] = v;
  env[kTokenVar] = token;

  // Everything the child touches is built before fork.
  std::vector<std::string> env_strings;
  for (const auto& [k, v] : env) env_strings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::string sh = "/bin/sh", dash_c = "-c", command = request.command;
  std::array<char*, 4> argv = {sh.data(), dash_c.data(), command.data(), nullptr};
  const std::string workdir = request.workdir.string();
  NetworkFilter filter;
  const std::optional<Identity> identity = options_.run_as;
  const pid_t parent = ::getpid();

  Pipe in, out, err, status;
  if (!in.open() || !out.open() || !err.open() || !status.open()) {
    result.stderr_data = std::string("sandbox: pipe failed: ") + std::strerror(errno);
    return result;
  }

  const auto start = Steady::now();
  pid_t pid = ::fork();
  if (pid < 0) {
    result.stderr_data = std::string("sandbox: fork failed: ") + std::strerror(errno);
    return result;
  }

  if (pid == 0) {
    ::setpgid(0, 0);
    sigset_t all;
    sigemptyset(&all);
    ::sigprocmask(SIG_SETMASK, &all, nullptr);
    for (int sig = 1; sig < NSIG; ++sig) ::signal(sig, SIG_DFL);
    ::dup2(in.read, STDIN_FILENO);
    ::dup2(out.write, STDOUT_FILENO);
    ::dup2(err.write, STDERR_FILENO);
    // Drop every inherited descriptor except the CLOEXEC status pipe.
    if (status.write > 3) ::close_range(3, unsigned(status.write - 1), 0);
    ::close_range(unsigned(status.write + 1), ~0u, 0);
    if (::chdir(workdir.c_str()) != 0) child_fail(status.write, kStageChdir);
    if (identity) {
      if (::setgroups(0, nullptr) != 0 || ::setgid(identity->gid) != 0 ||
          ::setuid(identity->uid) != 0) {
        child_fail(status.write, kStageIdentity);
      }
    }
    ::prctl(PR_SET_PDEATHSIG, SIGKILL);
    if (::getppid() != parent) ::_exit(127);
    auto limit = [&](int resource, rlim_t soft, rlim_t hard) {
      rlimit r{soft, hard};
      if (::setrlimit(resource, &r) != 0) child_fail(status.write, kStageLimits);
    };
    limit(RLIMIT_CPU, rlim_t(lim.cpu_seconds), rlim_t(lim.cpu_seconds + 1));
    limit(RLIMIT_AS, rlim_t(lim.memory_bytes), rlim_t(lim.memory_bytes));
    limit(RLIMIT_NPROC, rlim_t(lim.max_processes), rlim_t(lim.max_processes));
    limit(RLIMIT_FSIZE, kMaxFileBytes, kMaxFileBytes);
    limit(RLIMIT_CORE, 0, 0);
    if (::prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0) child_fail(status.write, kStageSeccomp);
    if (!network && ::prctl(PR_SET_SECCOMP, SECCOMP_MODE_FILTER, &filter.prog) != 0) {
      child_fail(status.write, kStageSeccomp);
    }
    ::execve(argv[0], argv.data(), envp.data());
    child_fail(status.write, kStageExec);
  }

  ::setpgid(pid, pid);  // also done in the child; whichever runs first wins
  Pipe::close_fd(in.read);
  Pipe::close_fd(out.write);
  Pipe::close_fd(err.write);
  Pipe::close_fd(status.write);

  std::vector<pid_t> swept;
  auto kill_tree = [&](int sig) {
    ::kill(-pid, sig);
    sweep_token(token, sig, swept);
    std::erase(swept, pid);
  };

  // The status pipe closes on successful exec and carries a record otherwise.
  ChildFailure failure{};
  ssize_t got;
  do {
    got = ::read(status.read, &failure, sizeof failure);
  } while (got < 0 && errno == EINTR);
  if (got == ssize_t(sizeof failure)) {
    kill_tree(SIGKILL);
    ::waitpid(pid, nullptr, 0);
    reap_orphans(swept, pid);
    result.outcome = Outcome::internal_error;
    result.stderr_data = std::string("sandbox: ") + stage_name(failure.stage) +
                         " failed: " + std::strerror(failure.err);
    result.wall_ms = std::chrono::duration_cast<milliseconds>(Steady::now() - start).count();
    return result;
  }

  set_nonblocking(out.read);
  set_nonblocking(err.read);
  std::string_view pending_stdin;
  if (request.stdin_data && !request.stdin_data->empty()) {
    pending_stdin = *request.stdin_data;
    set_nonblocking(in.write);
  } else {
    Pipe::close_fd(in.write);
  }

  const std::size_t cap = std::size_t(lim.max_output_bytes);
  auto capture = [&](int& fd, std::string& sink) {
    char buf[65536];
    while (true) {
      ssize_t n = ::read(fd, buf, sizeof buf);
      if (n > 0) {
        std::size_t room = cap - std::min(cap, sink.size());
        std::size_t take = std::min(room, std::size_t(n));
        sink.append(buf, take);
        if (take < std::size_t(n)) result.truncated = true;
        continue;
      }
      if (n == 0) Pipe::close_fd(fd);
      if (n < 0 && errno == EINTR) continue;
      return;
    }
  };

  const auto wall_deadline = start + std::chrono::seconds(lim.wall_seconds);
  const auto kill_deadline = wall_deadline + std::max(options_.grace - kKillMargin, milliseconds(0));
  bool timed_out = false;
  bool hard_killed = false;
  bool reaped = false;
  int wstatus = 0;
  rusage usage{};
  std::optional<Steady::time_point> drain_deadline;
  std::optional<Steady::time_point> exit_time;

  while (true) {
    if (!reaped) {
      pid_t r = ::wait4(pid, &wstatus, WNOHANG, &usage);
      if (r == pid) {
        reaped = true;
        exit_time = Steady::now();
        kill_tree(SIGKILL);  // background children die with the main process
        drain_deadline = Steady::now() + kDrain;
        Pipe::close_fd(in.write);
      }
    }
    const auto now = Steady::now();
    if (reaped && ((out.read < 0 && err.read < 0) || now >= *drain_deadline)) break;
    if (!reaped && !timed_out && now >= wall_deadline) {
      timed_out = true;
      kill_tree(SIGTERM);
    }
    if (!reaped && timed_out && !hard_killed && now >= kill_deadline) {
      hard_killed = true;
      kill_tree(SIGKILL);
    }

    std::array<pollfd, 3> fds{};
    nfds_t count = 0;
    if (out.read >= 0) fds[count++] = {out.read, POLLIN, 0};
    if (err.read >= 0) fds[count++] = {err.read, POLLIN, 0};
    if (in.write >= 0) fds[count++] = {in.write, POLLOUT, 0};
    ::poll(fds.data(), count, int(kPoll.count()));
    for (nfds_t i = 0; i < count; ++i) {
      if (!fds[i].revents) continue;
      if (fds[i].fd == out.read) {
        capture(out.read, result.stdout_data);
      } else if (fds[i].fd == err.read) {
        capture(err.read, result.stderr_data);
      } else if (fds[i].fd == in.write) {
        if (fds[i].revents & (POLLERR | POLLHUP)) {
          Pipe::close_fd(in.write);
          continue;
        }
        ssize_t n = ::write(in.write, pending_stdin.data(), pending_stdin.size());
        if (n > 0) pending_stdin.remove_prefix(std::size_t(n));
        if ((n < 0 && errno != EAGAIN && errno != EINTR) || pending_stdin.empty()) {
          Pipe::close_fd(in.write);
        }
      }
    }
  }
  kill_tree(SIGKILL);
  reap_orphans(swept, pid);

  result.wall_ms =
      std::chrono::duration_cast<milliseconds>(exit_time.value_or(Steady::now()) - start).count();

  const double cpu_used = double(usage.ru_utime.tv_sec + usage.ru_stime.tv_sec) +
                          double(usage.ru_utime.tv_usec + usage.ru_stime.tv_usec) / 1e6;
  const bool signaled = WIFSIGNALED(wstatus);
  const int sig = signaled ? WTERMSIG(wstatus) : 0;
  const bool cpu_exhausted =
      signaled && (sig == SIGXCPU || (sig == SIGKILL && cpu_used >= double(lim.cpu_seconds)));

  if (timed_out || cpu_exhausted) {
    result.outcome = Outcome::timeout;
    return result;
  }
  result.exit_code = WIFEXITED(wstatus) ? WEXITSTATUS(wstatus) : 128 + sig;
  if (*result.exit_code == 0) {
    result.outcome = result.truncated ? Outcome::output_truncated_ok : Outcome::ok;
    return result;
  }
  const bool near_memory_cap =
      signaled && double(usage.ru_maxrss) * 1024.0 >= 0.9 * double(lim.memory_bytes);
  if (contains_memory_marker(result.stderr_data) || near_memory_cap) {
    result.outcome = Outcome::memory_exceeded;
  } else {
    result.outcome = Outcome::nonzero_exit;
  }
  return result;
}

}  // namespace gradeforge::sandbox
