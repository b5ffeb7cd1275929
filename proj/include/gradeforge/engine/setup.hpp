#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "gradeforge/sandbox/sandbox.hpp"

namespace gradeforge::engine {

enum class PackageMode {
  passthrough,  // run pip installs as written (sudo still stripped)
  cached,       // replace pip installs with a check against the package cache
};

struct SetupPlan {
  std::string command;                // what actually runs in the sandbox
  std::vector<std::string> packages;  // pip requirement names found, in order
};

// Removes `sudo` and its options from every command in a `;`/`&&`/`||`
// chain. Children never hold privileges, so sudo would only fail.
std::string strip_sudo(std::string_view command);

// Strips sudo and, in cached mode, turns each `pip install X Y` (also pip3,
// python3 -m pip) into an import-metadata check for X and Y. Installs with
// options that cannot be mapped to package names (-r, -e, URLs) are kept.
SetupPlan plan_setup(std::string_view command, PackageMode mode);

// Distribution name without version specifier or extras: "pandas>=2" -> "pandas".
std::string requirement_name(std::string_view requirement);

// Directory per package set holding anything not already installed system
// wide. Warm-up runs pip only for packages that are missing, and only when
// the network is allowed; an offline deployment must pre-warm or rely on
// system packages.
class PackageCache {
 public:
  PackageCache(std::filesystem::path root, sandbox::Sandbox& sandbox);

  // Returns the directory to put on PYTHONPATH. Safe to call concurrently.
  std::filesystem::path warm(const std::vector<std::string>& packages, bool network_allowed);

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  sandbox::Sandbox& sandbox_;
  std::mutex mutex_;
  std::map<std::string, bool> ready_;
};

}  // namespace gradeforge::engine
