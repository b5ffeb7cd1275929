#include "gradeforge/service/service.hpp"

#include <atomic>
#include <charconv>
#include <condition_variable>
#include <cstdio>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <openssl/crypto.h>

#include "gradeforge/classroom/manager.hpp"
#include "gradeforge/core/report.hpp"
#include "gradeforge/engine/grader.hpp"
#include "gradeforge/engine/queue.hpp"
#include "gradeforge/engine/setup.hpp"
#include "gradeforge/sandbox/languages.hpp"
#include "gradeforge/sandbox/sandbox.hpp"
#include "gradeforge/similarity/winnow.hpp"
#include "gradeforge/util/files.hpp"
#include "gradeforge/util/hash.hpp"
#include "gradeforge/util/time.hpp"
#include "gradeforge/version.hpp"

namespace gradeforge::service {

using nlohmann::json;
using Req = httplib::Request;
using Res = httplib::Response;

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return 400;
    case ErrorKind::auth: return 401;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::suite:
    case ErrorKind::comparison: return 422;
    case ErrorKind::payload_too_large: return 413;
    case ErrorKind::queue_full: return 503;
    case ErrorKind::config:
    case ErrorKind::internal: return 500;
  }
  return 500;
}

namespace {

constexpr const char* kJson = "application/json; charset=utf-8";
constexpr int kRetryAfterSeconds = 5;

void log_line(const std::string& message) {
  std::fprintf(stderr, "gradeforge: %s\n", message.c_str());
}

void send_json(Res& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(core::dump_json(body), kJson);
}

void send_error(Res& res, ErrorKind kind, const std::string& message, const std::string& field = {}) {
  json err = {{"code", std::string(to_string(kind))}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  if (kind == ErrorKind::queue_full) res.set_header("Retry-After", std::to_string(kRetryAfterSeconds));
  send_json(res, {{"error", err}}, http_status(kind));
}

using Handler = std::function<void(const Req&, Res&)>;

Handler guarded(Handler inner) {
  return [inner = std::move(inner)](const Req& req, Res& res) {
    try {
      inner(req, res);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::internal || e.kind() == ErrorKind::config) {
        log_line(req.method + " " + req.path + ": " + e.what());
      }
      send_error(res, e.kind(), e.what(), e.field());
    } catch (const json::exception& e) {
      send_error(res, ErrorKind::validation, std::string("malformed request body: ") + e.what());
    } catch (const std::exception& e) {
      log_line(req.method + " " + req.path + ": " + e.what());
      send_error(res, ErrorKind::internal, e.what());
    }
  };
}

json body_object(const Req& req) {
  json j = json::parse(req.body.empty() ? std::string("{}") : req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorKind::validation, "request body must be a JSON object", "body");
  }
  return j;
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw Error(ErrorKind::validation, std::string(key) + " is required and must be a string", key);
  }
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_array()) throw Error(ErrorKind::validation, std::string(key) + " must be an array", key);
  for (const auto& v : *it) {
    if (!v.is_string()) throw Error(ErrorKind::validation, std::string(key) + " must hold strings", key);
    out.push_back(v.get<std::string>());
  }
  return out;
}

int int_param(const Req& req, const char* key, int fallback) {
  if (!req.has_param(key)) return fallback;
  auto text = req.get_param_value(key);
  int value = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw Error(ErrorKind::validation, std::string(key) + " must be an integer", key);
  }
  return value;
}

double double_param(const Req& req, const char* key, double fallback) {
  if (!req.has_param(key)) return fallback;
  auto text = req.get_param_value(key);
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::validation, std::string(key) + " must be a number", key);
}

bool key_matches(const std::string& expected, const std::string& given) {
  return expected.size() == given.size() &&
         CRYPTO_memcmp(expected.data(), given.data(), expected.size()) == 0;
}

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

const char* kUiPlaceholder =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>gradeforge</title></head>"
    "<body><h1>gradeforge</h1><p>No web UI bundle is installed. Set GRADEFORGE_UI_DIR "
    "to a built asset directory.</p></body></html>";

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceConfig cfg);

  void start();
  void stop();
  void register_routes(httplib::Server& server, const BindAddress& bind);
  void install_common(httplib::Server& server);

  std::shared_ptr<const core::TestSuite> suite_for(const classroom::Assignment& a, int variant);
  void enqueue_submission(const classroom::SubmissionRecord& record);
  void recover();
  void warm_in_background(const classroom::Assignment& a);
  json job_json(const std::string& job_id);
  util::FileMap upload_files(const Req& req);
  json submit(const std::string& workspace_id, const Req& req);

  // handlers
  void runs(const Req& req, Res& res);
  void similarity(const std::string& assignment_id, const Req& req, Res& res);
  json ui_config(const Req& req);

  ServiceConfig config;
  sandbox::LanguageRegistry languages;
  std::unique_ptr<classroom::ClassroomManager> manager;
  std::unique_ptr<sandbox::Sandbox> sandbox;
  std::unique_ptr<engine::PackageCache> packages;
  std::unique_ptr<engine::Grader> grader;
  std::unique_ptr<engine::GradingQueue> queue;

  std::mutex suites_mutex;
  std::map<std::pair<std::string, int>, std::shared_ptr<const core::TestSuite>> suites;

  std::mutex warm_mutex;
  std::vector<std::thread> warmers;

  std::vector<std::unique_ptr<httplib::Server>> servers;
  std::vector<std::thread> listeners;
  std::vector<int> ports;

  std::mutex state_mutex;
  std::condition_variable state_cv;
  bool running = false;
  bool stopped = false;
};

Service::Impl::Impl(ServiceConfig cfg) : config(std::move(cfg)) {
  config.validate();
  languages = config.languages_path ? sandbox::LanguageRegistry::load_file(config.languages_path->string())
                                    : sandbox::LanguageRegistry::defaults();

  manager = std::make_unique<classroom::ClassroomManager>(
      classroom::ClassroomManager::Options{config.data_dir, util::now_utc});
  if (manager->load_warning()) log_line("event log: " + *manager->load_warning());

  auto sandbox_options = sandbox::Sandbox::default_options();
  if (config.sandbox_root) sandbox_options.root = *config.sandbox_root;
  sandbox_options.max_concurrent = config.effective_workers();
  sandbox_options.force_network_off = config.intranet;
  sandbox = std::make_unique<sandbox::Sandbox>(sandbox_options);

  packages = std::make_unique<engine::PackageCache>(sandbox_options.root / "package-cache", *sandbox);

  engine::GradingPolicy policy;
  policy.setup_network = !config.intranet;
  policy.packages = config.package_mode;
  grader = std::make_unique<engine::Grader>(*sandbox, policy, packages.get(), &languages);

  queue = std::make_unique<engine::GradingQueue>(
      *grader, engine::GradingQueue::Options{config.effective_workers(), config.max_pending});
  queue->set_listener([this](const engine::GradingJob& job) {
    if (job.state == engine::JobState::done && job.report) {
      manager->record_report(job.submission_ref, *job.report);
    } else if (job.state == engine::JobState::failed) {
      manager->record_failure(job.submission_ref, job.error);
    }
  });
}

std::shared_ptr<const core::TestSuite> Service::Impl::suite_for(const classroom::Assignment& a,
                                                                int variant) {
  std::lock_guard lock(suites_mutex);
  auto key = std::make_pair(a.id, variant);
  auto it = suites.find(key);
  if (it == suites.end()) {
    auto suite = std::make_shared<const core::TestSuite>(a.variants.at(variant).suite);
    it = suites.emplace(key, std::move(suite)).first;
  }
  return it->second;
}

void Service::Impl::enqueue_submission(const classroom::SubmissionRecord& record) {
  auto ws = manager->workspace(record.workspace_id);
  auto a = manager->assignment(ws.assignment_id);
  engine::JobSpec spec;
  spec.submission_ref = record.id;
  spec.files = record.files;
  spec.suite = suite_for(a, ws.variant_index);
  spec.language_hint = a.config.language;
  spec.job_id = record.job_id;
  // Already persisted: never drop it for capacity.
  spec.over_capacity = true;
  queue->enqueue(std::move(spec));
}

void Service::Impl::recover() {
  auto pending = manager->ungraded();
  for (const auto& record : pending) {
    try {
      enqueue_submission(record);
    } catch (const std::exception& e) {
      log_line("could not re-enqueue submission " + record.id + ": " + e.what());
    }
  }
  if (!pending.empty()) log_line("re-enqueued " + std::to_string(pending.size()) + " ungraded submission(s)");
}

void Service::Impl::warm_in_background(const classroom::Assignment& a) {
  std::vector<std::shared_ptr<const core::TestSuite>> todo;
  for (std::size_t i = 0; i < a.variants.size(); ++i) todo.push_back(suite_for(a, static_cast<int>(i)));
  std::lock_guard lock(warm_mutex);
  warmers.emplace_back([this, todo = std::move(todo)] {
    for (const auto& suite : todo) {
      try {
        grader->warm_packages(*suite);
      } catch (const std::exception& e) {
        log_line(std::string("package warm-up failed: ") + e.what());
      }
    }
  });
}

json Service::Impl::job_json(const std::string& job_id) {
  if (queue->contains(job_id)) return engine::to_json(queue->job_status(job_id));
  auto record = manager->submission_for_job(job_id);
  if (!record) throw Error(ErrorKind::not_found, "unknown job " + job_id, "job_id");
  engine::GradingJob job;
  job.job_id = job_id;
  job.submission_ref = record->id;
  if (record->report) {
    job.state = engine::JobState::done;
    job.report = record->report;
  } else if (record->grading_error) {
    job.state = engine::JobState::failed;
    job.error = *record->grading_error;
  }
  return engine::to_json(job);
}

util::FileMap Service::Impl::upload_files(const Req& req) {
  if (!req.is_multipart_form_data()) {
    throw Error(ErrorKind::validation, "expected multipart/form-data with file parts", "files");
  }
  util::FileMap files;
  std::size_t total = 0;
  for (const auto& [name, part] : req.files) {
    if (part.filename.empty()) continue;
    total += part.content.size();
    files[util::checked_relative_path(part.filename)] = part.content;
  }
  if (total > config.max_upload_bytes) {
    throw Error(ErrorKind::payload_too_large,
                "submission exceeds " + std::to_string(config.max_upload_bytes) + " bytes", "files");
  }
  if (files.empty()) throw Error(ErrorKind::validation, "no files uploaded", "files");
  return files;
}

json Service::Impl::submit(const std::string& workspace_id, const Req& req) {
  auto files = upload_files(req);
  auto ws = manager->workspace(workspace_id);
  std::string submitter = req.has_file("submitter") ? req.get_file_value("submitter").content : "";
  if (submitter.empty()) submitter = ws.members.size() == 1 ? ws.members.front() : ws.owner;
  if (queue->pending() >= queue->max_pending()) {
    throw Error(ErrorKind::queue_full, "grading queue is full, retry later");
  }
  auto record = manager->submit(workspace_id, submitter, files);
  enqueue_submission(record);
  return {{"submission_id", record.id},
          {"job_id", record.job_id},
          {"workspace_id", record.workspace_id},
          {"sequence", record.sequence},
          {"late", record.late}};
}

void Service::Impl::runs(const Req& req, Res& res) {
  auto body = body_object(req);
  auto language_id = required_string(body, "language_id");
  const auto* lang = languages.find(language_id);
  if (!lang) throw Error(ErrorKind::validation, "unknown language '" + language_id + "'", "language_id");
  if (!body.contains("sourcecode") || !body["sourcecode"].is_string()) {
    throw Error(ErrorKind::validation, "sourcecode is required and must be a string", "sourcecode");
  }

  util::FileMap files;
  if (auto it = body.find("files"); it != body.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorKind::validation, "files must be an array", "files");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& f = (*it)[i];
      std::string field = "files[" + std::to_string(i) + "]";
      if (!f.is_object()) throw Error(ErrorKind::validation, field + " must be an object", field);
      auto name = required_string(f, "name");
      if (!f.contains("content_base64") || !f["content_base64"].is_string()) {
        throw Error(ErrorKind::validation, field + ".content_base64 is required", field + ".content_base64");
      }
      files[util::checked_relative_path(name)] = util::base64_decode(f["content_base64"].get<std::string>());
    }
  }
  files[lang->main_file] = body["sourcecode"].get<std::string>();

  auto limits = config.run_limits;
  if (auto it = body.find("limits"); it != body.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(ErrorKind::validation, "limits must be an object", "limits");
    limits = sandbox::limits_from_json(*it, limits);
  }
  limits.network_allowed = false;
  limits.validate();

  std::optional<std::string> input;
  if (auto it = body.find("input"); it != body.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(ErrorKind::validation, "input must be a string", "input");
    input = it->get<std::string>();
  }

  auto workspace = sandbox->prepare_workspace(files);
  auto compile_limits = limits;
  compile_limits.cpu_seconds = compile_limits.wall_seconds;
  auto compiled = sandbox::compile_if_needed(*sandbox, *lang, workspace, compile_limits);
  if (!compiled.clean_exit()) {
    auto out = sandbox::to_json(compiled);
    out["stage"] = "compile";
    send_json(res, out);
    return;
  }
  sandbox::ExecRequest exec;
  exec.command = lang->run_command();
  exec.workdir = workspace.path();
  exec.stdin_data = input;
  exec.limits = limits;
  auto result = sandbox->execute(exec);
  auto out = sandbox::to_json(result);
  out["stage"] = "run";
  send_json(res, out);
}

void Service::Impl::similarity(const std::string& assignment_id, const Req& req, Res& res) {
  auto a = manager->assignment(assignment_id);
  similarity::ReportOptions options;
  options.k = int_param(req, "k", options.k);
  options.w = int_param(req, "w", options.w);
  options.threshold = double_param(req, "threshold", options.threshold);
  if (options.k < 1) throw Error(ErrorKind::validation, "k must be >= 1", "k");
  if (options.w < 1) throw Error(ErrorKind::validation, "w must be >= 1", "w");
  if (!(options.threshold >= 0.0 && options.threshold <= 1.0)) {
    throw Error(ErrorKind::validation, "threshold must be within [0, 1]", "threshold");
  }
  if (req.has_param("mode")) {
    auto mode = req.get_param_value("mode");
    if (mode == "containment") options.mode = similarity::ScoreMode::containment;
    else if (mode == "jaccard") options.mode = similarity::ScoreMode::jaccard;
    else throw Error(ErrorKind::validation, "mode must be containment or jaccard", "mode");
  }

  std::vector<similarity::Document> docs;
  for (const auto& [ws, record] : manager->latest_submissions(assignment_id)) {
    // Each owner's starter files come from their own variant.
    const auto& starter = a.variants.at(ws.variant_index).template_files;
    util::FileMap own;
    for (const auto& [path, bytes] : record.files) {
      auto t = starter.find(path);
      if (t == starter.end() || t->second != bytes) own.emplace(path, bytes);
    }
    docs.push_back({ws.owner, std::move(own), ws.id});
  }
  send_json(res, similarity::to_json(similarity::similarity_report(docs, options)));
}

json Service::Impl::ui_config(const Req& req) {
  json assignments = json::array();
  for (const auto& a : manager->assignments()) {
    assignments.push_back({{"id", a.id},
                           {"classroom_id", a.classroom_id},
                           {"title", a.config.title},
                           {"deadline", util::format_iso8601(a.config.deadline)},
                           {"mode", std::string(classroom::to_string(a.config.mode))},
                           {"max_points", a.max_points()}});
  }
  json out = {{"server_time", util::format_iso8601(manager->now())},
              {"version", kVersion},
              {"auth_required", config.api_key.has_value()},
              {"assignments", assignments}};
  if (req.has_param("assignment")) out["assignment"] = classroom::to_json(manager->assignment(req.get_param_value("assignment")));
  return out;
}

void Service::Impl::install_common(httplib::Server& server) {
  server.new_task_queue = [n = config.http_threads] { return new httplib::ThreadPool(n); };
  server.set_payload_max_length(config.max_upload_bytes + (1u << 20));
  server.set_default_headers({{"X-Gradeforge-Version", kVersion}});

  server.set_pre_routing_handler([this](const Req& req, Res& res) {
    if (!config.api_key) return httplib::Server::HandlerResponse::Unhandled;
    if (req.path == "/healthz" || req.path == "/ui" || starts_with(req.path, "/ui/")) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    if (!key_matches(*config.api_key, req.get_header_value("X-Api-Key"))) {
      send_error(res, ErrorKind::auth, "missing or invalid X-Api-Key");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  server.set_error_handler([](const Req& req, Res& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    switch (res.status) {
      case 404: send_error(res, ErrorKind::not_found, "no route for " + req.method + " " + req.path); break;
      case 413: send_error(res, ErrorKind::payload_too_large, "request body too large"); break;
      case 400: send_error(res, ErrorKind::validation, "malformed request"); break;
      default: {
        int status = res.status;
        send_error(res, ErrorKind::internal, httplib::status_message(status));
        res.status = status;
      }
    }
    return httplib::Server::HandlerResponse::Handled;
  });
}

void Service::Impl::register_routes(httplib::Server& s, const BindAddress& bind) {
  s.Get("/healthz", guarded([this](const Req&, Res& res) {
    send_json(res, {{"status", "ok"},
                    {"version", kVersion},
                    {"languages_count", languages.list().size()},
                    {"queue_depth", queue->pending()},
                    {"classrooms_count", manager->classrooms().size()}});
  }));

  s.Get("/api/v1/languages", guarded([this](const Req&, Res& res) {
    json out = json::array();
    for (const auto& l : languages.list()) {
      out.push_back({{"id", l.id},
                     {"display_name", l.display_name},
                     {"source_extension", l.source_extension},
                     {"main_file", l.main_file},
                     {"compiled", l.compiled()}});
    }
    send_json(res, out);
  }));

  if (bind.serves_runs()) {
    s.Post("/api/v1/runs", guarded([this](const Req& req, Res& res) { runs(req, res); }));
  }
  if (!bind.serves_lifecycle()) return;

  s.Get("/api/v1/ui-config", guarded([this](const Req& req, Res& res) { send_json(res, ui_config(req)); }));

  s.Post("/api/v1/classrooms", guarded([this](const Req& req, Res& res) {
    auto body = body_object(req);
    auto c = manager->create_classroom(required_string(body, "name"), string_list(body, "staff"));
    send_json(res, classroom::to_json(c), 201);
  }));
  s.Get("/api/v1/classrooms", guarded([this](const Req&, Res& res) {
    json out = json::array();
    for (const auto& c : manager->classrooms()) out.push_back(classroom::to_json(c));
    send_json(res, out);
  }));
  s.Get(R"(/api/v1/classrooms/([^/]+))", guarded([this](const Req& req, Res& res) {
    send_json(res, classroom::to_json(manager->classroom(req.matches[1])));
  }));
  s.Post(R"(/api/v1/classrooms/([^/]+)/roster)", guarded([this](const Req& req, Res& res) {
    auto students = classroom::parse_roster_csv(req.body);
    send_json(res, classroom::to_json(manager->import_roster(req.matches[1], students)));
  }));
  s.Post(R"(/api/v1/classrooms/([^/]+)/assignments)", guarded([this](const Req& req, Res& res) {
    if (!req.is_multipart_form_data() || !req.has_file("config") || !req.has_file("archive")) {
      throw Error(ErrorKind::validation, "expected multipart parts 'config' and 'archive'", "archive");
    }
    json cfg = json::parse(req.get_file_value("config").content, nullptr, false);
    if (cfg.is_discarded()) throw Error(ErrorKind::validation, "config is not valid JSON", "config");
    auto config_value = classroom::assignment_config_from_json(cfg);
    auto tree = util::unpack_tar(req.get_file_value("archive").content);
    auto a = manager->create_assignment(req.matches[1], config_value, classroom::variants_from_tree(tree));
    warm_in_background(a);
    send_json(res, classroom::to_json(a), 201);
  }));
  s.Get(R"(/api/v1/classrooms/([^/]+)/assignments)", guarded([this](const Req& req, Res& res) {
    std::string id = req.matches[1];
    manager->classroom(id);
    json out = json::array();
    for (const auto& a : manager->assignments()) {
      if (a.classroom_id == id) out.push_back(classroom::to_json(a));
    }
    send_json(res, out);
  }));

  s.Get(R"(/api/v1/assignments/([^/]+))", guarded([this](const Req& req, Res& res) {
    send_json(res, classroom::to_json(manager->assignment(req.matches[1])));
  }));
  s.Post(R"(/api/v1/assignments/([^/]+)/accept)", guarded([this](const Req& req, Res& res) {
    auto body = body_object(req);
    auto ws = manager->accept(req.matches[1], required_string(body, "owner"), string_list(body, "members"));
    send_json(res, classroom::to_json(ws));
  }));
  s.Post(R"(/api/v1/assignments/([^/]+)/submissions)", guarded([this](const Req& req, Res& res) {
    std::string owner = req.has_file("owner") ? req.get_file_value("owner").content : "";
    if (owner.empty()) throw Error(ErrorKind::validation, "owner is required", "owner");
    auto ws = manager->find_workspace(req.matches[1], owner);
    if (!ws) {
      manager->assignment(req.matches[1]);
      throw Error(ErrorKind::not_found, "owner '" + owner + "' has not accepted this assignment", "owner");
    }
    send_json(res, submit(ws->id, req), 202);
  }));
  s.Get(R"(/api/v1/assignments/([^/]+)/status)", guarded([this](const Req& req, Res& res) {
    json out = json::array();
    for (const auto& row : manager->status(req.matches[1])) out.push_back(classroom::to_json(row));
    send_json(res, out);
  }));
  s.Get(R"(/api/v1/assignments/([^/]+)/grades\.csv)", guarded([this](const Req& req, Res& res) {
    res.set_content(manager->export_grades(req.matches[1]), "text/csv; charset=utf-8");
  }));
  s.Get(R"(/api/v1/assignments/([^/]+)/similarity)", guarded([this](const Req& req, Res& res) {
    similarity(req.matches[1], req, res);
  }));

  s.Get(R"(/api/v1/workspaces/([^/]+))", guarded([this](const Req& req, Res& res) {
    send_json(res, classroom::to_json(manager->workspace(req.matches[1]), true));
  }));
  s.Post(R"(/api/v1/workspaces/([^/]+)/submissions)", guarded([this](const Req& req, Res& res) {
    send_json(res, submit(req.matches[1], req), 202);
  }));
  s.Get(R"(/api/v1/workspaces/([^/]+)/submissions)", guarded([this](const Req& req, Res& res) {
    std::string id = req.matches[1];
    manager->workspace(id);
    json out = json::array();
    for (const auto& r : manager->submissions(id)) out.push_back(classroom::to_json(r));
    send_json(res, out);
  }));
  s.Get(R"(/api/v1/workspaces/([^/]+)/metrics)", guarded([this](const Req& req, Res& res) {
    send_json(res, classroom::to_json(manager->project_metrics(req.matches[1])));
  }));

  s.Get(R"(/api/v1/submissions/([^/]+))", guarded([this](const Req& req, Res& res) {
    send_json(res, classroom::to_json(manager->submission(req.matches[1])));
  }));
  s.Post(R"(/api/v1/submissions/([^/]+)/feedback)", guarded([this](const Req& req, Res& res) {
    auto body = body_object(req);
    auto f = manager->add_feedback(req.matches[1], required_string(body, "author"),
                                   required_string(body, "text"));
    send_json(res, {{"author", f.author}, {"text", f.text}, {"created_at", util::format_iso8601(f.created_at)}},
              201);
  }));

  s.Get(R"(/api/v1/jobs/([^/]+))", guarded([this](const Req& req, Res& res) {
    send_json(res, job_json(req.matches[1]));
  }));

  if (config.ui_dir && std::filesystem::is_directory(*config.ui_dir)) {
    s.set_mount_point("/ui", config.ui_dir->string());
  } else {
    auto placeholder = [](const Req&, Res& res) { res.set_content(kUiPlaceholder, "text/html; charset=utf-8"); };
    s.Get("/ui", placeholder);
    s.Get("/ui/", placeholder);
  }
}

void Service::Impl::start() {
  {
    std::lock_guard lock(state_mutex);
    if (running || stopped) throw Error(ErrorKind::internal, "service already started");
  }
  recover();
  for (const auto& bind : config.bind_addresses) {
    auto server = std::make_unique<httplib::Server>();
    install_common(*server);
    register_routes(*server, bind);
    int port = bind.port;
    bool ok;
    if (port == 0) {
      port = server->bind_to_any_port(bind.host);
      ok = port > 0;
    } else {
      ok = server->bind_to_port(bind.host, port);
    }
    if (!ok) {
      for (auto& s : servers) s->stop();
      for (auto& t : listeners) t.join();
      throw Error(ErrorKind::config,
                  "cannot bind " + bind.host + ":" + std::to_string(bind.port), "bind");
    }
    ports.push_back(port);
    log_line("listening on " + bind.host + ":" + std::to_string(port) + " (" +
             std::string(to_string(bind.capability)) + ")");
    auto* raw = server.get();
    servers.push_back(std::move(server));
    listeners.emplace_back([raw] { raw->listen_after_bind(); });
  }
  std::lock_guard lock(state_mutex);
  running = true;
}

void Service::Impl::stop() {
  {
    std::lock_guard lock(state_mutex);
    if (stopped) return;
    stopped = true;
  }
  for (auto& s : servers) s->stop();
  for (auto& t : listeners) {
    if (t.joinable()) t.join();
  }
  queue->shutdown();
  std::vector<std::thread> pending;
  {
    std::lock_guard lock(warm_mutex);
    pending.swap(warmers);
  }
  for (auto& t : pending) t.join();
  state_cv.notify_all();
}

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { impl_->stop(); }

void Service::start() { impl_->start(); }

void Service::stop() { impl_->stop(); }

void Service::wait() {
  std::unique_lock lock(impl_->state_mutex);
  impl_->state_cv.wait(lock, [this] { return impl_->stopped; });
}

std::vector<int> Service::bound_ports() const { return impl_->ports; }

const ServiceConfig& Service::config() const { return impl_->config; }

classroom::ClassroomManager& Service::manager() { return *impl_->manager; }

}  // namespace gradeforge::service
