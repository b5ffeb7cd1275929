#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradeforge/engine/setup.hpp"
#include "gradeforge/sandbox/limits.hpp"

namespace gradeforge::service {

// What an address serves besides /healthz.
enum class Capability { all, runs, lifecycle };

std::string_view to_string(Capability c);

struct BindAddress {
  std::string host;
  int port = 0;  // 0 picks a free port
  Capability capability = Capability::all;

  bool serves_runs() const { return capability != Capability::lifecycle; }
  bool serves_lifecycle() const { return capability != Capability::runs; }
};

// "host:port" with an optional "/all", "/runs" or "/lifecycle" suffix;
// "[::1]:8080" for IPv6. Throws Error(config).
BindAddress parse_bind_address(std::string_view text);
// Comma-separated list of the above.
std::vector<BindAddress> parse_bind_list(std::string_view text);

struct ServiceConfig {
  std::vector<BindAddress> bind_addresses = {{"127.0.0.1", 8080, Capability::all}};
  std::optional<std::string> api_key;
  std::filesystem::path data_dir = "gradeforge-data";
  unsigned worker_count = 0;    // 0 = hardware concurrency
  std::size_t max_pending = 0;  // 0 = 10 x worker_count
  std::optional<std::filesystem::path> languages_path;
  std::optional<std::filesystem::path> sandbox_root;
  std::optional<std::filesystem::path> ui_dir;
  // Limits for POST /runs when a request does not override them.
  sandbox::ExecLimits run_limits = default_run_limits();
  // Closed-book deployment: no network for any execution.
  bool intranet = false;
  engine::PackageMode package_mode = engine::PackageMode::cached;
  std::size_t max_upload_bytes = 10u << 20;
  unsigned http_threads = 32;

  static sandbox::ExecLimits default_run_limits();

  // Reads GRADEFORGE_DATA_DIR, GRADEFORGE_API_KEY, GRADEFORGE_BIND,
  // GRADEFORGE_WORKERS, GRADEFORGE_SANDBOX_ROOT, GRADEFORGE_LANGUAGES,
  // GRADEFORGE_UI_DIR and GRADEFORGE_INTRANET over the defaults.
  static ServiceConfig from_environment(const std::map<std::string, std::string>& env);
  static ServiceConfig from_process_environment();

  unsigned effective_workers() const;
  // Throws Error(config) when an invariant is broken.
  void validate() const;
};

}  // namespace gradeforge::service
