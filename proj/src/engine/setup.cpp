#include "gradeforge/engine/setup.hpp"

#include <algorithm>
#include <cctype>
#include <sys/stat.h>

#include "gradeforge/error.hpp"
#include "gradeforge/util/hash.hpp"

namespace gradeforge::engine {

namespace fs = std::filesystem;

namespace {

struct Segment {
  std::string text;
  std::string separator;  // the operator that followed it, "" for the last
};

// Splits on ; && || and newlines outside of quotes.
std::vector<Segment> split_chain(std::string_view cmd) {
  std::vector<Segment> out;
  std::string cur;
  char quote = 0;
  for (std::size_t i = 0; i < cmd.size(); ++i) {
    char c = cmd[i];
    if (quote) {
      cur.push_back(c);
      if (c == quote) quote = 0;
      else if (c == '\\' && quote == '"' && i + 1 < cmd.size()) cur.push_back(cmd[++i]);
      continue;
    }
    if (c == '\\' && i + 1 < cmd.size()) {
      cur.push_back(c);
      cur.push_back(cmd[++i]);
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      cur.push_back(c);
      continue;
    }
    std::string sep;
    if (c == ';' || c == '\n') sep = ";";
    else if ((c == '&' || c == '|') && i + 1 < cmd.size() && cmd[i + 1] == c) sep = std::string(2, c);
    if (sep.empty()) {
      cur.push_back(c);
      continue;
    }
    if (sep.size() == 2) ++i;
    out.push_back({std::move(cur), sep});
    cur.clear();
  }
  out.push_back({std::move(cur), ""});
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a leading "sudo [opts]" from one simple command.
std::string strip_sudo_segment(const std::string& segment) {
  std::string s = trim(segment);
  while (s == "sudo" || s.rfind("sudo ", 0) == 0 || s.rfind("sudo\t", 0) == 0) {
    std::size_t pos = 4;
    auto skip_ws = [&] {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    };
    auto next_word = [&] {
      std::size_t start = pos;
      while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      return s.substr(start, pos - start);
    };
    skip_ws();
    while (pos < s.size() && s[pos] == '-') {
      std::string opt = next_word();
      skip_ws();
      if (opt == "--") break;
      // Options taking a separate argument.
      if (opt == "-u" || opt == "-g" || opt == "-C" || opt == "-D" || opt == "-h" ||
          opt == "-p" || opt == "-r" || opt == "-t" || opt == "-U") {
        next_word();
        skip_ws();
      }
    }
    s = trim(s.substr(pos));
  }
  return s;
}

std::string python_string_literal(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

std::string check_command(const std::vector<std::string>& packages) {
  std::string tuple;
  for (const auto& p : packages) tuple += python_string_literal(p) + ",";
  return "python3 -c " +
         sandbox::shell_quote("import importlib.metadata as m; [m.version(p) for p in (" +
                              tuple + ")]");
}

// Package names of a `pip install` command, or nullopt when it is not one or
// cannot be reduced to plain names.
std::optional<std::vector<std::string>> pip_install_packages(const std::string& segment) {
  auto w = words(segment);
  std::size_t i = 0;
  if (i < w.size() && (w[i] == "pip" || w[i] == "pip3")) {
    ++i;
  } else if (i + 2 < w.size() && (w[i] == "python3" || w[i] == "python") && w[i + 1] == "-m" &&
             w[i + 2] == "pip") {
    i += 3;
  } else {
    return std::nullopt;
  }
  if (i >= w.size() || w[i] != "install") return std::nullopt;
  ++i;
  static const std::vector<std::string> flags_ok = {
      "-U", "--upgrade", "--user", "-q", "--quiet", "--no-cache-dir", "--no-input",
      "--disable-pip-version-check", "--break-system-packages", "-v", "--verbose"};
  std::vector<std::string> packages;
  for (; i < w.size(); ++i) {
    const std::string& a = w[i];
    if (a.front() == '-') {
      if (std::find(flags_ok.begin(), flags_ok.end(), a) == flags_ok.end()) return std::nullopt;
      continue;
    }
    std::string unq = a;
    if (unq.size() >= 2 && (unq.front() == '\'' || unq.front() == '"') && unq.back() == unq.front()) {
      unq = unq.substr(1, unq.size() - 2);
    }
    if (unq.find('/') != std::string::npos || unq.find(':') != std::string::npos) return std::nullopt;
    std::string name = requirement_name(unq);
    if (name.empty()) return std::nullopt;
    packages.push_back(name);
  }
  if (packages.empty()) return std::nullopt;
  return packages;
}

}  // namespace

std::string requirement_name(std::string_view requirement) {
  std::size_t end = 0;
  while (end < requirement.size()) {
    char c = requirement[end];
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ++end;
    else break;
  }
  return std::string(requirement.substr(0, end));
}

std::string strip_sudo(std::string_view command) {
  return plan_setup(command, PackageMode::passthrough).command;
}

SetupPlan plan_setup(std::string_view command, PackageMode mode) {
  SetupPlan plan;
  std::string pending_sep;
  for (const auto& seg : split_chain(command)) {
    std::string s = strip_sudo_segment(seg.text);
    if (s.empty()) {
      // "a;;b" or a trailing ";": keep the stronger operator if any.
      if (!seg.separator.empty() && seg.separator != ";") pending_sep = seg.separator;
      continue;
    }
    if (auto pkgs = pip_install_packages(s)) {
      for (auto& p : *pkgs) {
        if (std::find(plan.packages.begin(), plan.packages.end(), p) == plan.packages.end()) {
          plan.packages.push_back(p);
        }
      }
      if (mode == PackageMode::cached) s = check_command(*pkgs);
    }
    if (!plan.command.empty()) plan.command += pending_sep == ";" ? "; " : " " + pending_sep + " ";
    plan.command += s;
    pending_sep = seg.separator.empty() ? ";" : seg.separator;
  }
  if (plan.command.empty()) plan.command = "true";
  return plan;
}

PackageCache::PackageCache(fs::path root, sandbox::Sandbox& sandbox)
    : root_(std::move(root)), sandbox_(sandbox) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorKind::internal, "cannot create package cache " + root_.string());
  ::chmod(root_.c_str(), 0755);
}

fs::path PackageCache::warm(const std::vector<std::string>& packages, bool network_allowed) {
  std::vector<std::string> sorted = packages;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::string key_src;
  for (const auto& p : sorted) key_src += p + "\n";
  const std::string key = util::sha256_hex(key_src).substr(0, 16);
  const fs::path dir = root_ / key;

  std::lock_guard lock(mutex_);
  if (ready_[key] || sorted.empty()) return dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  ::chmod(dir.c_str(), 0755);
  sandbox_.grant_access(dir);

  sandbox::ExecLimits limits;
  limits.wall_seconds = 600;
  limits.cpu_seconds = 600;
  limits.memory_bytes = 2LL << 30;

  // Which packages are not importable yet (system site-packages or cache)?
  std::vector<std::string> missing;
  for (const auto& p : sorted) {
    sandbox::ExecRequest req;
    req.command = check_command({p});
    req.workdir = dir;
    req.limits = limits;
    req.environment = {{"PYTHONPATH", dir.string()}};
    if (!sandbox_.execute(req).clean_exit()) missing.push_back(p);
  }
  if (missing.empty()) {
    ready_[key] = true;
    return dir;
  }
  if (!network_allowed) return dir;
  std::string cmd = "python3 -m pip install --quiet --disable-pip-version-check --no-cache-dir "
                    "--target . ";
  for (const auto& p : missing) cmd += sandbox::shell_quote(p) + " ";
  sandbox::ExecRequest req;
  req.command = cmd;
  req.workdir = dir;
  req.limits = limits;
  req.limits.network_allowed = true;
  req.limits.max_processes = 256;
  if (sandbox_.execute(req).clean_exit()) ready_[key] = true;
  return dir;
}

}  // namespace gradeforge::engine
