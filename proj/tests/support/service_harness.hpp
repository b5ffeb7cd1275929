#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "gradeforge/service/service.hpp"
#include "gradeforge/util/files.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

namespace gradeforge::testing {

// In-process job service on an ephemeral port.
class TestService {
 public:
  explicit TestService(const std::filesystem::path& data_dir, service::ServiceConfig cfg = base_config()) {
    cfg.data_dir = data_dir;
    if (cfg.bind_addresses.empty()) cfg.bind_addresses = {{"127.0.0.1", 0, service::Capability::all}};
    service_ = std::make_unique<service::Service>(cfg);
    service_->start();
  }

  static service::ServiceConfig base_config() {
    service::ServiceConfig cfg;
    cfg.bind_addresses = {{"127.0.0.1", 0, service::Capability::all}};
    cfg.worker_count = 2;
    return cfg;
  }

  int port(std::size_t i = 0) const { return service_->bound_ports().at(i); }

  httplib::Client client(const std::string& api_key = {}, std::size_t i = 0) const {
    httplib::Client c("127.0.0.1", port(i));
    c.set_read_timeout(120);
    c.set_connection_timeout(5);
    if (!api_key.empty()) c.set_default_headers({{"X-Api-Key", api_key}});
    return c;
  }

  service::Service& service() { return *service_; }
  void stop() { service_.reset(); }

 private:
  std::unique_ptr<service::Service> service_;
};

inline nlohmann::json body_of(const httplib::Result& r) {
  if (!r) return nullptr;
  return nlohmann::json::parse(r->body, nullptr, false);
}

// tar with the iris template and suite, the way `assignment create` packs it.
inline std::string iris_archive() {
  util::FileMap tree;
  for (auto& [path, data] : iris_template()) tree["template/" + path] = data;
  tree["autograde.spec"] = util::read_file(iris_dir() / "autograde.spec");
  return util::pack_tar(tree);
}

inline std::string archive_of(const util::FileMap& template_files, const std::string& spec) {
  util::FileMap tree;
  for (auto& [path, data] : template_files) tree["template/" + path] = data;
  tree["autograde.spec"] = spec;
  return util::pack_tar(tree);
}

struct Course {
  std::string classroom_id;
  std::string assignment_id;
};

// Classroom with the given roster and one assignment built from `archive`.
inline Course make_course(httplib::Client& c, const std::vector<std::string>& students,
                          const std::string& archive = iris_archive(),
                          nlohmann::json config = {{"title", "iris"}, {"deadline", "2030-01-01T00:00:00Z"}}) {
  Course course;
  auto cr = c.Post("/api/v1/classrooms", nlohmann::json{{"name", "ml"}, {"staff", {"prof"}}}.dump(),
                   "application/json");
  course.classroom_id = body_of(cr).value("id", std::string());
  std::string roster = "id,name\n";
  for (const auto& s : students) roster += s + "," + s + "\n";
  c.Post("/api/v1/classrooms/" + course.classroom_id + "/roster", roster, "text/csv");
  httplib::MultipartFormDataItems items = {{"config", config.dump(), "", "application/json"},
                                           {"archive", archive, "a.tar", "application/x-tar"}};
  auto ar = c.Post("/api/v1/classrooms/" + course.classroom_id + "/assignments", items);
  course.assignment_id = body_of(ar).value("id", std::string());
  return course;
}

inline std::string accept(httplib::Client& c, const std::string& assignment_id, const std::string& owner) {
  auto r = c.Post("/api/v1/assignments/" + assignment_id + "/accept", nlohmann::json{{"owner", owner}}.dump(),
                  "application/json");
  return body_of(r).value("id", std::string());
}

inline httplib::Result submit(httplib::Client& c, const std::string& workspace_id, const util::FileMap& files) {
  httplib::MultipartFormDataItems items;
  for (const auto& [path, data] : files) items.push_back({"files", data, path, "application/octet-stream"});
  return c.Post("/api/v1/workspaces/" + workspace_id + "/submissions", items);
}

// Polls until done/failed; records every state seen.
inline nlohmann::json wait_job(httplib::Client& c, const std::string& job_id, std::vector<std::string>* states = nullptr,
                               std::chrono::seconds limit = std::chrono::seconds(120)) {
  auto deadline = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < deadline) {
    auto j = body_of(c.Get("/api/v1/jobs/" + job_id));
    if (j.is_object()) {
      std::string state = j.value("state", std::string());
      if (states && (states->empty() || states->back() != state)) states->push_back(state);
      if (state == "done" || state == "failed") return j;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  return nullptr;
}

}  // namespace gradeforge::testing
