#include "gradeforge/service/config.hpp"

#include <algorithm>
#include <thread>

#include "gradeforge/error.hpp"

extern char** environ;

namespace gradeforge::service {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::config, field + ": " + what, field);
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

bool truthy(const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  return l == "1" || l == "true" || l == "yes" || l == "on";
}

}  // namespace

std::string_view to_string(Capability c) {
  switch (c) {
    case Capability::all: return "all";
    case Capability::runs: return "runs";
    case Capability::lifecycle: return "lifecycle";
  }
  return "all";
}

BindAddress parse_bind_address(std::string_view raw) {
  std::string text = trim(raw);
  BindAddress out;
  if (auto slash = text.rfind('/'); slash != std::string::npos) {
    std::string cap = text.substr(slash + 1);
    if (cap == "all") out.capability = Capability::all;
    else if (cap == "runs") out.capability = Capability::runs;
    else if (cap == "lifecycle") out.capability = Capability::lifecycle;
    else bad("bind", "unknown capability '" + cap + "' in '" + text + "'");
    text.resize(slash);
  }
  std::string port;
  if (!text.empty() && text.front() == '[') {
    auto close = text.find(']');
    if (close == std::string::npos || close + 1 >= text.size() || text[close + 1] != ':') {
      bad("bind", "malformed address '" + text + "'");
    }
    out.host = text.substr(1, close - 1);
    port = text.substr(close + 2);
  } else {
    auto colon = text.rfind(':');
    if (colon == std::string::npos) bad("bind", "expected host:port, got '" + text + "'");
    out.host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  if (out.host.empty()) bad("bind", "missing host in '" + text + "'");
  if (port.empty() || port.size() > 5 || port.find_first_not_of("0123456789") != std::string::npos ||
      std::stoi(port) > 65535) {
    bad("bind", "invalid port in '" + text + "'");
  }
  out.port = std::stoi(port);
  return out;
}

std::vector<BindAddress> parse_bind_list(std::string_view text) {
  std::vector<BindAddress> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto item = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    if (!item.empty()) out.push_back(parse_bind_address(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) bad("bind", "at least one bind address is required");
  return out;
}

sandbox::ExecLimits ServiceConfig::default_run_limits() {
  sandbox::ExecLimits l;
  l.wall_seconds = 30;
  l.cpu_seconds = 10;
  return l;
}

ServiceConfig ServiceConfig::from_environment(const std::map<std::string, std::string>& env) {
  ServiceConfig c;
  auto get = [&](const char* key) -> std::optional<std::string> {
    auto it = env.find(key);
    if (it == env.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  if (auto v = get("GRADEFORGE_DATA_DIR")) c.data_dir = *v;
  if (auto v = get("GRADEFORGE_API_KEY")) c.api_key = *v;
  if (auto v = get("GRADEFORGE_BIND")) c.bind_addresses = parse_bind_list(*v);
  if (auto v = get("GRADEFORGE_WORKERS")) {
    if (v->find_first_not_of("0123456789") != std::string::npos || v->size() > 4 || std::stoi(*v) < 1) {
      bad("GRADEFORGE_WORKERS", "must be a positive integer");
    }
    c.worker_count = static_cast<unsigned>(std::stoi(*v));
  }
  if (auto v = get("GRADEFORGE_SANDBOX_ROOT")) c.sandbox_root = *v;
  if (auto v = get("GRADEFORGE_LANGUAGES")) c.languages_path = *v;
  if (auto v = get("GRADEFORGE_UI_DIR")) c.ui_dir = *v;
  if (auto v = get("GRADEFORGE_INTRANET")) c.intranet = truthy(*v);
  return c;
}

ServiceConfig ServiceConfig::from_process_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    auto eq = kv.find('=');
    if (eq != std::string_view::npos) env.emplace(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return from_environment(env);
}

unsigned ServiceConfig::effective_workers() const {
  return worker_count ? worker_count : std::max(1u, std::thread::hardware_concurrency());
}

void ServiceConfig::validate() const {
  if (bind_addresses.empty()) bad("bind", "at least one bind address is required");
  if (data_dir.empty()) bad("data_dir", "must be set");
  if (api_key && api_key->empty()) bad("api_key", "must be non-empty when set");
  run_limits.validate();
}

}  // namespace gradeforge::service
