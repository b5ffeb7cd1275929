#include <csignal>
#include <fstream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "gradeforge/cli/cli.hpp"
#include "gradeforge/core/test_suite.hpp"
#include "gradeforge/engine/grader.hpp"
#include "gradeforge/error.hpp"
#include "gradeforge/sandbox/languages.hpp"
#include "gradeforge/service/service.hpp"
#include "gradeforge/util/csv.hpp"
#include "gradeforge/util/files.hpp"
#include "gradeforge/util/time.hpp"
#include "gradeforge/version.hpp"

namespace gradeforge::cli {

using nlohmann::json;

namespace {

// Carries an exit code up to run().
struct Failure {
  int code;
  std::string message;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::internal:
    case ErrorKind::auth:
    case ErrorKind::queue_full: return kExitServer;
    default: return kExitUsage;
  }
}

int exit_code_for_status(int status) {
  if (status == 401 || status >= 500) return kExitServer;
  return kExitUsage;
}

std::string strip_slash(std::string url) {
  while (!url.empty() && url.back() == '/') url.pop_back();
  return url;
}

class Api {
 public:
  explicit Api(const CliConfig& cfg) : url_(strip_slash(cfg.server_url)), client_(url_) {
    client_.set_connection_timeout(5);
    client_.set_read_timeout(180);
    client_.set_write_timeout(60);
    if (cfg.api_key) client_.set_default_headers({{"X-Api-Key", *cfg.api_key}});
  }

  json get(const std::string& path) { return parse(check(client_.Get(path), path)); }
  std::string get_text(const std::string& path) { return check(client_.Get(path), path).body; }
  json post(const std::string& path, const json& body) {
    return parse(check(client_.Post(path, body.dump(), "application/json"), path));
  }
  json post_text(const std::string& path, const std::string& body, const std::string& type) {
    return parse(check(client_.Post(path, body, type), path));
  }
  json post_multipart(const std::string& path, const httplib::MultipartFormDataItems& items) {
    return parse(check(client_.Post(path, items), path));
  }

 private:
  const httplib::Response& check(const httplib::Result& r, const std::string& path) {
    if (!r) {
      throw Failure{kExitServer, "cannot reach " + url_ + ": " + httplib::to_string(r.error())};
    }
    last_ = r.value();
    if (last_.status >= 400) {
      std::string message = std::to_string(last_.status) + " from " + path;
      json body = json::parse(last_.body, nullptr, false);
      if (!body.is_discarded() && body.contains("error") && body["error"].is_object()) {
        const auto& e = body["error"];
        message += ": " + e.value("code", std::string()) + ": " + e.value("message", std::string());
        if (e.contains("field")) message += " (field " + e["field"].get<std::string>() + ")";
      }
      throw Failure{exit_code_for_status(last_.status), message};
    }
    return last_;
  }

  json parse(const httplib::Response& res) {
    json j = json::parse(res.body, nullptr, false);
    if (j.is_discarded()) throw Failure{kExitServer, "server returned a malformed body"};
    return j;
  }

  std::string url_;
  httplib::Client client_;
  httplib::Response last_;
};

std::filesystem::path existing_dir(const std::string& path, const std::string& field) {
  if (!std::filesystem::is_directory(path)) {
    throw Error(ErrorKind::validation, field + ": not a directory: " + path, field);
  }
  return path;
}

core::TestSuite load_suite(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorKind::validation, "spec file not found: " + path, "spec");
  }
  return core::parse_suite(util::read_file(path));
}

// Files given on the command line: directories contribute their tree,
// plain files their base name.
util::FileMap collect_upload(const std::vector<std::string>& paths) {
  util::FileMap files;
  for (const auto& p : paths) {
    if (std::filesystem::is_directory(p)) {
      for (auto& [rel, bytes] : util::read_tree(p)) files[rel] = std::move(bytes);
    } else if (std::filesystem::is_regular_file(p)) {
      files[std::filesystem::path(p).filename().string()] = util::read_file(p);
    } else {
      throw Error(ErrorKind::validation, "no such file: " + p, "path");
    }
  }
  if (files.empty()) throw Error(ErrorKind::validation, "nothing to submit", "path");
  return files;
}

int report_exit(const core::GradeReport& report) { return report.all_passed ? kExitOk : kExitFailing; }

void print_created(std::ostream& out, OutputFormat format, const std::string& kind, const json& body) {
  if (format == OutputFormat::structured) {
    out << core::dump_json(body) << "\n";
  } else {
    out << kind << " " << body.value("id", std::string()) << "\n";
  }
}

int serve(const CliConfig& cfg_flags, bool api_key_flag, const std::vector<std::string>& binds,
          const std::string& data_dir, unsigned workers, std::size_t max_pending,
          const std::string& sandbox_root, const std::string& languages, const std::string& ui_dir,
          bool intranet, const std::string& port_file) {
  auto cfg = service::ServiceConfig::from_process_environment();
  if (api_key_flag) cfg.api_key = cfg_flags.api_key;
  if (!binds.empty()) {
    cfg.bind_addresses.clear();
    for (const auto& b : binds) {
      for (auto& a : service::parse_bind_list(b)) cfg.bind_addresses.push_back(a);
    }
  }
  if (!data_dir.empty()) cfg.data_dir = data_dir;
  if (workers) cfg.worker_count = workers;
  if (max_pending) cfg.max_pending = max_pending;
  if (!sandbox_root.empty()) cfg.sandbox_root = sandbox_root;
  if (!languages.empty()) cfg.languages_path = languages;
  if (!ui_dir.empty()) cfg.ui_dir = ui_dir;
  if (intranet) cfg.intranet = true;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::Service svc(cfg);
  svc.start();
  if (!port_file.empty()) {
    std::string text;
    for (int p : svc.bound_ports()) text += std::to_string(p) + "\n";
    util::write_file(port_file + ".tmp", text);
    std::filesystem::rename(port_file + ".tmp", port_file);
  }
  int sig = 0;
  sigwait(&signals, &sig);
  std::fprintf(stderr, "gradeforge: signal %d, shutting down\n", sig);
  svc.stop();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> storage = args;
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(storage.size()), argv.data(), out, err);
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"gradeforge: autograding service and client"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string server_flag, api_key_flag, format_flag, config_flag;
  app.add_option("--server", server_flag, "Server URL, http://host:port");
  app.add_option("--api-key", api_key_flag, "Value for the X-Api-Key header");
  app.add_option("--format", format_flag, "table, csv or structured");
  app.add_option("--config", config_flag, "Config file (default ~/.gradeforge.conf)");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the job service");
  std::vector<std::string> binds;
  std::string data_dir, sandbox_root, languages_path, ui_dir, port_file;
  unsigned workers = 0;
  std::size_t max_pending = 0;
  bool intranet = false;
  serve_cmd->add_option("--bind", binds, "addr:port[/all|/runs|/lifecycle], repeatable");
  serve_cmd->add_option("--data-dir", data_dir);
  serve_cmd->add_option("--workers", workers)->check(CLI::PositiveNumber);
  serve_cmd->add_option("--max-pending", max_pending)->check(CLI::PositiveNumber);
  serve_cmd->add_option("--sandbox-root", sandbox_root);
  serve_cmd->add_option("--languages", languages_path, "Language registry file");
  serve_cmd->add_option("--ui-dir", ui_dir, "Static web UI bundle served under /ui/");
  serve_cmd->add_flag("--intranet", intranet, "Deny network to every execution");
  serve_cmd->add_option("--port-file", port_file, "Write the bound ports here once listening");

  // classroom
  auto* classroom_cmd = app.add_subcommand("classroom", "Classroom management");
  classroom_cmd->require_subcommand(1);
  auto* classroom_create = classroom_cmd->add_subcommand("create", "Create a classroom");
  std::string classroom_name;
  std::vector<std::string> staff;
  classroom_create->add_option("--name", classroom_name)->required();
  classroom_create->add_option("--staff", staff, "Staff ids allowed to give feedback")->delimiter(',');
  auto* roster_import = classroom_cmd->add_subcommand("roster-import", "Import a roster CSV");
  std::string roster_classroom, roster_file;
  roster_import->add_option("--classroom", roster_classroom)->required();
  roster_import->add_option("--file", roster_file)->required()->check(CLI::ExistingFile);

  // assignment
  auto* assignment_cmd = app.add_subcommand("assignment", "Assignment management");
  assignment_cmd->require_subcommand(1);
  auto* assignment_create = assignment_cmd->add_subcommand("create", "Create an assignment");
  std::string a_classroom, a_title, a_template, a_spec, a_deadline, a_mode = "individual", a_seed, a_late,
      a_scoring, a_language, a_visibility;
  std::vector<std::string> a_variants;
  assignment_create->add_option("--classroom", a_classroom)->required();
  assignment_create->add_option("--title", a_title, "Defaults to the template directory name");
  assignment_create->add_option("--template", a_template)->required();
  assignment_create->add_option("--spec", a_spec)->required();
  assignment_create->add_option("--deadline", a_deadline, "ISO-8601 timestamp")->required();
  assignment_create->add_option("--mode", a_mode, "individual or group:N");
  assignment_create->add_option("--variant", a_variants, "DIR:FILE, repeatable");
  assignment_create->add_option("--seed", a_seed, "Hex seed for variant choice");
  assignment_create->add_option("--late-policy", a_late, "reject or accept_flagged");
  assignment_create->add_option("--scoring", a_scoring, "best or latest");
  assignment_create->add_option("--visibility", a_visibility, "private or public");
  assignment_create->add_option("--language", a_language, "Compile hint for graded jobs");

  auto* accept_cmd = app.add_subcommand("accept", "Accept an assignment");
  std::string acc_assignment, acc_owner;
  std::vector<std::string> acc_members;
  accept_cmd->add_option("--assignment", acc_assignment)->required();
  accept_cmd->add_option("--owner", acc_owner)->required();
  accept_cmd->add_option("--members", acc_members, "Team members for group assignments")->delimiter(',');

  auto* submit_cmd = app.add_subcommand("submit", "Submit files and wait for the grade");
  std::string sub_workspace, sub_submitter;
  std::vector<std::string> sub_paths;
  bool sub_no_wait = false;
  double sub_timeout = 600;
  submit_cmd->add_option("--workspace", sub_workspace)->required();
  submit_cmd->add_option("--submitter", sub_submitter);
  submit_cmd->add_flag("--no-wait", sub_no_wait, "Print the job id and return");
  submit_cmd->add_option("--timeout", sub_timeout, "Seconds to wait for the grade")->check(CLI::PositiveNumber);
  submit_cmd->add_option("paths", sub_paths, "Files or directories")->required();

  auto* status_cmd = app.add_subcommand("status", "Assignment status table");
  std::string st_assignment;
  status_cmd->add_option("--assignment", st_assignment)->required();

  auto* grades_cmd = app.add_subcommand("grades", "Grades CSV export");
  std::string gr_assignment;
  grades_cmd->add_option("--assignment", gr_assignment)->required();

  auto* similarity_cmd = app.add_subcommand("similarity", "Similarity report");
  std::string sim_assignment, sim_mode;
  int sim_k = 12, sim_w = 8;
  double sim_threshold = 0.5;
  similarity_cmd->add_option("--assignment", sim_assignment)->required();
  similarity_cmd->add_option("--k", sim_k)->check(CLI::PositiveNumber);
  similarity_cmd->add_option("--w", sim_w)->check(CLI::PositiveNumber);
  similarity_cmd->add_option("--threshold", sim_threshold)->check(CLI::Range(0.0, 1.0));
  similarity_cmd->add_option("--mode", sim_mode, "containment or jaccard");

  auto* local_cmd = app.add_subcommand("grade-local", "Grade a directory without a server");
  std::string loc_spec, loc_dir, loc_language, loc_sandbox_root, loc_languages;
  bool loc_offline = false;
  local_cmd->add_option("--spec", loc_spec)->required();
  local_cmd->add_option("--dir", loc_dir)->required();
  local_cmd->add_option("--language", loc_language, "Compile hint");
  local_cmd->add_option("--languages", loc_languages, "Language registry file");
  local_cmd->add_option("--sandbox-root", loc_sandbox_root);
  local_cmd->add_flag("--offline", loc_offline, "No network, also for setup commands");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CliConfig cfg = load_config_file(config_flag.empty() ? default_config_path() : std::filesystem::path(config_flag));
    if (!server_flag.empty()) cfg.server_url = server_flag;
    if (!api_key_flag.empty()) cfg.api_key = api_key_flag;
    if (!format_flag.empty()) cfg.output_format = output_format_from_string(format_flag);
    const auto format = cfg.output_format;

    if (*serve_cmd) {
      return serve(cfg, !api_key_flag.empty(), binds, data_dir, workers, max_pending, sandbox_root,
                   languages_path, ui_dir, intranet, port_file);
    }

    if (*local_cmd) {
      auto suite = load_suite(loc_spec);
      auto files = util::read_tree(existing_dir(loc_dir, "dir"));
      auto registry = loc_languages.empty() ? sandbox::LanguageRegistry::defaults()
                                            : sandbox::LanguageRegistry::load_file(loc_languages);
      if (!loc_language.empty() && !registry.find(loc_language)) {
        throw Error(ErrorKind::validation, "unknown language '" + loc_language + "'", "language");
      }
      auto options = sandbox::Sandbox::default_options();
      if (!loc_sandbox_root.empty()) options.root = loc_sandbox_root;
      options.force_network_off = loc_offline;
      sandbox::Sandbox sandbox(options);
      engine::PackageCache cache(options.root / "package-cache", sandbox);
      engine::GradingPolicy policy;
      policy.setup_network = !loc_offline;
      engine::Grader grader(sandbox, policy, &cache, &registry);
      std::optional<std::string> hint;
      if (!loc_language.empty()) hint = loc_language;
      auto report = grader.grade_submission(files, suite, hint);
      out << format_report(report, format);
      return report_exit(report);
    }

    // Everything below talks to a server; check inputs first.
    cfg.validate();

    if (*assignment_create) {
      auto template_dir = existing_dir(a_template, "template");
      load_suite(a_spec);
      auto suite_text = util::read_file(a_spec);
      json config = {{"title", a_title.empty() ? template_dir.filename().string() : a_title},
                     {"deadline", a_deadline},
                     {"mode", a_mode}};
      if (!a_seed.empty()) {
        if (a_seed.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
          throw Error(ErrorKind::validation, "seed must be hexadecimal", "seed");
        }
        config["seed"] = a_seed;
      }
      if (!a_late.empty()) config["late_policy"] = a_late;
      if (!a_scoring.empty()) config["scoring"] = a_scoring;
      if (!a_visibility.empty()) config["visibility"] = a_visibility;
      if (!a_language.empty()) config["language"] = a_language;
      classroom::assignment_config_from_json(config);

      util::FileMap tree;
      for (auto& [rel, bytes] : util::read_tree(template_dir)) tree["template/" + rel] = std::move(bytes);
      tree["autograde.spec"] = suite_text;
      for (std::size_t i = 0; i < a_variants.size(); ++i) {
        auto colon = a_variants[i].rfind(':');
        if (colon == std::string::npos) {
          throw Error(ErrorKind::validation, "--variant expects DIR:FILE, got '" + a_variants[i] + "'", "variant");
        }
        auto dir = existing_dir(a_variants[i].substr(0, colon), "variant");
        auto spec = a_variants[i].substr(colon + 1);
        std::string prefix = "variants/" + std::to_string(i + 1) + "/";
        for (auto& [rel, bytes] : util::read_tree(dir)) tree[prefix + "template/" + rel] = std::move(bytes);
        load_suite(spec);
        tree[prefix + "autograde.spec"] = util::read_file(spec);
      }
      classroom::variants_from_tree(tree);

      Api api(cfg);
      auto created = api.post_multipart(
          "/api/v1/classrooms/" + a_classroom + "/assignments",
          {{"config", config.dump(), "", "application/json"},
           {"archive", util::pack_tar(tree), "assignment.tar", "application/x-tar"}});
      print_created(out, format, "assignment", created);
      return kExitOk;
    }

    Api api(cfg);

    if (*classroom_create) {
      print_created(out, format, "classroom",
                    api.post("/api/v1/classrooms", {{"name", classroom_name}, {"staff", staff}}));
      return kExitOk;
    }
    if (*roster_import) {
      auto body = api.post_text("/api/v1/classrooms/" + roster_classroom + "/roster", util::read_file(roster_file),
                                "text/csv");
      if (format == OutputFormat::structured) out << core::dump_json(body) << "\n";
      else out << "roster " << body["roster"].size() << " students\n";
      return kExitOk;
    }
    if (*accept_cmd) {
      auto ws = api.post("/api/v1/assignments/" + acc_assignment + "/accept",
                         {{"owner", acc_owner}, {"members", acc_members}});
      print_created(out, format, "workspace", ws);
      return kExitOk;
    }
    if (*submit_cmd) {
      auto files = collect_upload(sub_paths);
      httplib::MultipartFormDataItems items;
      for (const auto& [path, bytes] : files) items.push_back({"files", bytes, path, "application/octet-stream"});
      if (!sub_submitter.empty()) items.push_back({"submitter", sub_submitter, "", ""});
      auto accepted = api.post_multipart("/api/v1/workspaces/" + sub_workspace + "/submissions", items);
      std::string job_id = accepted.at("job_id");
      if (sub_no_wait) {
        if (format == OutputFormat::structured) out << core::dump_json(accepted) << "\n";
        else out << "job " << job_id << "\n";
        return kExitOk;
      }
      if (accepted.value("late", false)) err << "note: submission is after the deadline\n";
      auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(sub_timeout);
      auto delay = std::chrono::milliseconds(500);
      while (true) {
        auto job = api.get("/api/v1/jobs/" + job_id);
        auto state = job.value("state", std::string());
        if (state == "done") {
          auto report = core::grade_report_from_json(job.at("report"));
          out << format_report(report, format);
          return report_exit(report);
        }
        if (state == "failed") throw Failure{kExitServer, "grading failed: " + job.value("error", std::string())};
        if (std::chrono::steady_clock::now() + delay > deadline) {
          throw Failure{kExitServer, "timed out waiting for job " + job_id + " (state " + state + ")"};
        }
        std::this_thread::sleep_for(delay);
        delay = std::min(delay * 2, std::chrono::milliseconds(8000));
      }
    }
    if (*status_cmd) {
      std::vector<classroom::StatusRow> rows;
      for (const auto& j : api.get("/api/v1/assignments/" + st_assignment + "/status")) {
        rows.push_back(classroom::status_row_from_json(j));
      }
      out << format_status(rows, format);
      return kExitOk;
    }
    if (*grades_cmd) {
      out << api.get_text("/api/v1/assignments/" + gr_assignment + "/grades.csv");
      return kExitOk;
    }
    if (*similarity_cmd) {
      std::string path = "/api/v1/assignments/" + sim_assignment + "/similarity?k=" + std::to_string(sim_k) +
                         "&w=" + std::to_string(sim_w) + "&threshold=" + std::to_string(sim_threshold);
      if (!sim_mode.empty()) path += "&mode=" + sim_mode;
      auto pairs = api.get(path);
      if (format == OutputFormat::structured) {
        for (const auto& p : pairs) out << core::dump_json(p) << "\n";
      } else if (format == OutputFormat::csv) {
        out << "doc_a,doc_b,score,shared_print_count\r\n";
        for (const auto& p : pairs) {
          out << util::csv_row({p["doc_a"], p["doc_b"], p["score"].dump(), p["shared_print_count"].dump()});
        }
      } else {
        for (const auto& p : pairs) {
          out << p["doc_a"].get<std::string>() << "  " << p["doc_b"].get<std::string>() << "  "
              << p["score"].dump() << "  " << p["shared_print_count"].dump() << "\n";
        }
      }
      return kExitOk;
    }
    err << "error: no command\n";
    return kExitUsage;
  } catch (const Failure& f) {
    err << "error: " << f.message << "\n";
    return f.code;
  } catch (const Error& e) {
    err << "error: " << e.what();
    if (!e.field().empty()) err << " (field " << e.field() << ")";
    err << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitServer;
  }
}

}  // namespace gradeforge::cli
