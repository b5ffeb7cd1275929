#include "gradeforge/classroom/manager.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include "gradeforge/error.hpp"
#include "gradeforge/util/hash.hpp"

namespace gradeforge::classroom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void not_found(const std::string& what, const std::string& id,
                            const std::string& field) {
  throw Error(ErrorKind::not_found, "unknown " + what + " '" + id + "'", field);
}

std::int64_t ms(util::Timestamp t) { return util::to_epoch_ms(t); }
util::Timestamp ts(const json& j) { return util::from_epoch_ms(j.get<std::int64_t>()); }

}  // namespace

int pick_variant(const std::string& seed, const std::string& owner, int variant_count) {
  if (variant_count <= 1) return 0;
  return static_cast<int>(util::sha256_prefix64(seed + owner) %
                          static_cast<std::uint64_t>(variant_count));
}

ClassroomManager::ClassroomManager(Options options)
    : data_dir_(std::move(options.data_dir)),
      clock_(options.clock ? std::move(options.clock) : util::ClockFn(util::now_utc)),
      blobs_(data_dir_ / "blobs") {
  std::error_code ec;
  fs::create_directories(data_dir_, ec);
  if (ec) throw Error(ErrorKind::config, "cannot create data directory " + data_dir_.string());
  const fs::path log_path = data_dir_ / "events.log";
  auto loaded = EventLog::load(log_path);
  load_warning_ = loaded.warning;
  if (load_warning_) std::cerr << "gradeforge: warning: " << *load_warning_ << "\n";
  for (const auto& e : loaded.events) {
    try {
      apply(e);
    } catch (const std::exception& ex) {
      throw Error(ErrorKind::config, "event log replay failed at seq " +
                                         std::to_string(e.value("seq", std::int64_t{-1})) + ": " +
                                         ex.what());
    }
    seq_ = std::max(seq_, e.value("seq", seq_));
  }
  log_ = std::make_unique<EventLog>(log_path);
}

void ClassroomManager::commit(json event) {
  event["seq"] = ++seq_;
  apply(log_->append(event));
}

void ClassroomManager::apply(const json& e) {
  const std::string type = e.at("type").get<std::string>();
  State& s = state_;
  if (type == "classroom_created") {
    Classroom c;
    c.id = e.at("id");
    c.name = e.at("name");
    c.staff = e.at("staff").get<std::vector<std::string>>();
    c.created_at = ts(e.at("at"));
    s.classrooms[c.id] = std::move(c);
  } else if (type == "roster_imported") {
    Classroom& c = s.classrooms.at(e.at("classroom_id"));
    for (const auto& st : e.at("students")) {
      Student student{st.at("id"), st.value("name", ""), st.value("email", "")};
      auto it = std::find_if(c.roster.begin(), c.roster.end(),
                             [&](const Student& x) { return x.id == student.id; });
      if (it == c.roster.end()) c.roster.push_back(std::move(student));
      else *it = std::move(student);
    }
  } else if (type == "assignment_created") {
    Assignment a;
    a.id = e.at("id");
    a.classroom_id = e.at("classroom_id");
    a.config = assignment_config_from_json(e.at("config"));
    a.seed = e.at("seed");
    a.created_at = ts(e.at("at"));
    for (const auto& v : e.at("variants")) {
      a.variants.push_back({blobs_.get_snapshot(v.at("template")),
                            core::parse_suite(v.at("suite").get<std::string>())});
    }
    s.assignments[a.id] = std::move(a);
  } else if (type == "workspace_accepted") {
    Workspace w;
    w.id = e.at("id");
    w.assignment_id = e.at("assignment_id");
    w.owner = e.at("owner");
    w.members = e.at("members").get<std::vector<std::string>>();
    w.variant_index = e.at("variant_index");
    w.created_at = ts(e.at("at"));
    w.files = s.assignments.at(w.assignment_id).variants.at(w.variant_index).template_files;
    s.workspace_by_owner[{w.assignment_id, w.owner}] = w.id;
    s.workspaces[w.id] = std::move(w);
  } else if (type == "submission_created") {
    SubmissionRecord r;
    r.id = e.at("id");
    r.workspace_id = e.at("workspace_id");
    r.submitter = e.at("submitter");
    r.sequence = e.at("sequence");
    r.submitted_at = ts(e.at("at"));
    r.late = e.at("late");
    r.snapshot_hash = e.at("snapshot");
    r.job_id = e.at("job_id");
    r.files = blobs_.get_snapshot(r.snapshot_hash);
    s.workspaces.at(r.workspace_id).files = r.files;
    s.submissions_by_workspace[r.workspace_id].push_back(r.id);
    s.submission_by_job[r.job_id] = r.id;
    s.submission_order.push_back(r.id);
    s.submissions[r.id] = std::move(r);
  } else if (type == "report_recorded") {
    s.submissions.at(e.at("submission_id")).report = core::grade_report_from_json(e.at("report"));
  } else if (type == "grading_failed") {
    s.submissions.at(e.at("submission_id")).grading_error = e.at("error").get<std::string>();
  } else if (type == "feedback_added") {
    s.submissions.at(e.at("submission_id"))
        .feedback.push_back({e.at("author"), e.at("text"), ts(e.at("at"))});
  } else {
    throw Error(ErrorKind::config, "unknown event type '" + type + "'");
  }
}

Classroom ClassroomManager::create_classroom(const std::string& name,
                                             const std::vector<std::string>& staff) {
  if (name.empty()) throw Error(ErrorKind::validation, "name: must be non-empty", "name");
  if (staff.empty()) {
    throw Error(ErrorKind::validation, "staff: at least one instructor is required", "staff");
  }
  std::set<std::string> seen;
  for (const auto& s : staff) {
    if (s.empty() || !seen.insert(s).second) {
      throw Error(ErrorKind::validation, "staff: empty or duplicate instructor id", "staff");
    }
  }
  std::unique_lock lock(mutex_);
  std::string id = util::random_id();
  commit({{"type", "classroom_created"}, {"id", id}, {"name", name}, {"staff", staff},
          {"at", ms(clock_())}});
  return state_.classrooms.at(id);
}

Classroom ClassroomManager::import_roster(const std::string& classroom_id,
                                          const std::vector<Student>& students) {
  std::set<std::string> seen;
  json list = json::array();
  for (const auto& s : students) {
    if (s.id.empty()) throw Error(ErrorKind::validation, "roster: empty student id", "roster");
    if (!seen.insert(s.id).second) {
      throw Error(ErrorKind::validation, "roster: duplicate student id '" + s.id + "'", "roster");
    }
    list.push_back({{"id", s.id}, {"name", s.name}, {"email", s.email}});
  }
  std::unique_lock lock(mutex_);
  if (!state_.classrooms.count(classroom_id)) not_found("classroom", classroom_id, "classroom_id");
  commit({{"type", "roster_imported"}, {"classroom_id", classroom_id}, {"students", list}});
  return state_.classrooms.at(classroom_id);
}

Assignment ClassroomManager::create_assignment(const std::string& classroom_id,
                                               const AssignmentConfig& config,
                                               std::vector<Variant> variants) {
  config.validate();
  if (variants.empty()) {
    throw Error(ErrorKind::validation, "variants: at least one variant is required", "variants");
  }
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const std::string field = "variants[" + std::to_string(i) + "]";
    if (variants[i].template_files.empty()) {
      throw Error(ErrorKind::validation, field + ": empty template", field + ".template");
    }
    for (const auto& [path, _] : variants[i].template_files) util::checked_relative_path(path);
    if (variants[i].suite.max_points() != variants[0].suite.max_points()) {
      throw Error(ErrorKind::validation,
                  field + ": max_points " + std::to_string(variants[i].suite.max_points()) +
                      " differs from variant 0 (" +
                      std::to_string(variants[0].suite.max_points()) + ")",
                  "variants");
    }
  }
  json vs = json::array();
  for (const auto& v : variants) {
    vs.push_back({{"template", blobs_.put_snapshot(v.template_files)},
                  {"suite", core::serialize_suite(v.suite)}});
  }
  std::unique_lock lock(mutex_);
  if (!state_.classrooms.count(classroom_id)) not_found("classroom", classroom_id, "classroom_id");
  std::string id = util::random_id();
  commit({{"type", "assignment_created"},
          {"id", id},
          {"classroom_id", classroom_id},
          {"config", to_json(config)},
          {"seed", config.seed.value_or(id)},
          {"variants", vs},
          {"at", ms(clock_())}});
  return state_.assignments.at(id);
}

Workspace ClassroomManager::accept(const std::string& assignment_id, const std::string& owner,
                                   const std::vector<std::string>& members) {
  std::unique_lock lock(mutex_);
  const Assignment& a = assignment_locked(assignment_id);
  const Classroom& c = state_.classrooms.at(a.classroom_id);
  if (owner.empty()) throw Error(ErrorKind::validation, "owner: must be non-empty", "owner");

  std::vector<std::string> team;
  if (a.config.mode == Mode::individual) {
    if (!c.find_student(owner)) not_found("student", owner, "owner");
    if (!members.empty() && members != std::vector<std::string>{owner}) {
      throw Error(ErrorKind::validation, "members: individual assignments have no team members",
                  "members");
    }
    team = {owner};
  } else {
    team = members;
    std::sort(team.begin(), team.end());
    if (std::adjacent_find(team.begin(), team.end()) != team.end()) {
      throw Error(ErrorKind::validation, "members: duplicate member", "members");
    }
  }

  auto existing = state_.workspace_by_owner.find({assignment_id, owner});
  if (existing != state_.workspace_by_owner.end()) {
    const Workspace& w = state_.workspaces.at(existing->second);
    if (a.config.mode == Mode::group && !members.empty() && w.members != team) {
      throw Error(ErrorKind::conflict,
                  "team '" + owner + "' already exists with different members", "members");
    }
    return w;
  }

  if (a.config.mode == Mode::group) {
    const int size = *a.config.team_size;
    if (static_cast<int>(team.size()) != size) {
      throw Error(ErrorKind::validation,
                  "members: team has " + std::to_string(team.size()) + " members, assignment "
                  "requires " + std::to_string(size),
                  "members");
    }
    for (const auto& m : team) {
      if (!c.find_student(m)) not_found("student", m, "members");
    }
    for (const auto& [key, wid] : state_.workspace_by_owner) {
      if (key.first != assignment_id) continue;
      for (const auto& m : state_.workspaces.at(wid).members) {
        if (std::find(team.begin(), team.end(), m) != team.end()) {
          throw Error(ErrorKind::conflict,
                      "student '" + m + "' already belongs to team '" + key.second + "'",
                      "members");
        }
      }
    }
    if (c.find_student(owner) && std::find(team.begin(), team.end(), owner) == team.end()) {
      throw Error(ErrorKind::validation, "owner: team name collides with another student's id",
                  "owner");
    }
  }

  const int variant = pick_variant(a.seed, owner, static_cast<int>(a.variants.size()));
  std::string id = util::random_id();
  commit({{"type", "workspace_accepted"},
          {"id", id},
          {"assignment_id", assignment_id},
          {"owner", owner},
          {"members", team},
          {"variant_index", variant},
          {"at", ms(clock_())}});
  return state_.workspaces.at(id);
}

SubmissionRecord ClassroomManager::submit(const std::string& workspace_id,
                                          const std::string& submitter,
                                          const util::FileMap& files,
                                          std::optional<util::Timestamp> now) {
  if (files.empty()) throw Error(ErrorKind::validation, "files: empty submission", "files");
  util::FileMap uploaded;
  for (const auto& [path, data] : files) uploaded[util::checked_relative_path(path)] = data;

  std::unique_lock lock(mutex_);
  const Workspace& w = workspace_locked(workspace_id);
  const Assignment& a = state_.assignments.at(w.assignment_id);
  if (std::find(w.members.begin(), w.members.end(), submitter) == w.members.end()) {
    throw Error(ErrorKind::validation,
                "submitter: '" + submitter + "' is not a member of workspace " + workspace_id,
                "submitter");
  }
  const util::Timestamp at = now.value_or(clock_());
  const bool late = at > a.config.deadline;
  if (late && a.config.late_policy == LatePolicy::reject) {
    throw Error(ErrorKind::conflict,
                "deadline " + util::format_iso8601(a.config.deadline) + " has passed",
                "deadline");
  }
  util::FileMap snapshot = w.files;
  for (auto& [path, data] : uploaded) snapshot[path] = std::move(data);
  const std::string hash = blobs_.put_snapshot(snapshot);
  const auto& prior = state_.submissions_by_workspace[workspace_id];
  std::string id = util::random_id();
  commit({{"type", "submission_created"},
          {"id", id},
          {"workspace_id", workspace_id},
          {"submitter", submitter},
          {"sequence", static_cast<int>(prior.size()) + 1},
          {"at", ms(at)},
          {"late", late},
          {"snapshot", hash},
          {"job_id", util::random_id()}});
  return state_.submissions.at(id);
}

void ClassroomManager::record_report(const std::string& submission_id,
                                     const core::GradeReport& report) {
  std::unique_lock lock(mutex_);
  if (submission_locked(submission_id).graded()) return;
  commit({{"type", "report_recorded"},
          {"submission_id", submission_id},
          {"report", core::to_json(report)}});
}

void ClassroomManager::record_failure(const std::string& submission_id, const std::string& error) {
  std::unique_lock lock(mutex_);
  if (submission_locked(submission_id).graded()) return;
  commit({{"type", "grading_failed"}, {"submission_id", submission_id}, {"error", error}});
}

Feedback ClassroomManager::add_feedback(const std::string& submission_id,
                                        const std::string& author, const std::string& text) {
  if (author.empty()) throw Error(ErrorKind::validation, "author: must be non-empty", "author");
  if (text.empty()) throw Error(ErrorKind::validation, "text: must be non-empty", "text");
  std::unique_lock lock(mutex_);
  SubmissionRecord& s = submission_locked(submission_id);
  const Workspace& w = state_.workspaces.at(s.workspace_id);
  const Classroom& c =
      state_.classrooms.at(state_.assignments.at(w.assignment_id).classroom_id);
  if (std::find(c.staff.begin(), c.staff.end(), author) == c.staff.end()) {
    throw Error(ErrorKind::validation, "author: '" + author + "' is not classroom staff", "author");
  }
  commit({{"type", "feedback_added"},
          {"submission_id", submission_id},
          {"author", author},
          {"text", text},
          {"at", ms(clock_())}});
  return s.feedback.back();
}

std::vector<StatusRow> ClassroomManager::status(const std::string& assignment_id) const {
  std::shared_lock lock(mutex_);
  const Assignment& a = assignment_locked(assignment_id);
  const Classroom& c = state_.classrooms.at(a.classroom_id);
  const int max = a.max_points();

  auto row_for = [&](const Workspace& w) {
    StatusRow row;
    row.owner = w.owner;
    row.members = w.members;
    row.workspace_id = w.id;
    row.accepted = true;
    row.max_points = max;
    auto it = state_.submissions_by_workspace.find(w.id);
    if (it == state_.submissions_by_workspace.end()) return row;
    const SubmissionRecord* latest_valid = nullptr;
    for (const auto& sid : it->second) {
      const SubmissionRecord& s = state_.submissions.at(sid);
      row.submitted = true;
      if (!row.last_submission_at || s.submitted_at > *row.last_submission_at) {
        row.last_submission_at = s.submitted_at;
      }
      // Reports touched by grader faults do not count either way.
      if (!s.report || s.report->has_grader_fault()) continue;
      if (a.config.scoring == ScoringPolicy::best) {
        row.points = std::max(row.points, s.report->earned);
        row.passed = row.passed || s.report->all_passed;
      }
      latest_valid = &s;
    }
    if (a.config.scoring == ScoringPolicy::latest && latest_valid) {
      row.points = latest_valid->report->earned;
      row.passed = latest_valid->report->all_passed;
    }
    return row;
  };

  std::vector<StatusRow> rows;
  std::set<std::string> covered;
  for (const auto& [key, wid] : state_.workspace_by_owner) {
    if (key.first != assignment_id) continue;
    const Workspace& w = state_.workspaces.at(wid);
    rows.push_back(row_for(w));
    covered.insert(w.members.begin(), w.members.end());
  }
  for (const auto& student : c.roster) {
    if (covered.count(student.id)) continue;
    StatusRow row;
    row.owner = student.id;
    row.members = {student.id};
    row.max_points = max;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(),
            [](const StatusRow& x, const StatusRow& y) { return x.owner < y.owner; });
  return rows;
}

std::string ClassroomManager::export_grades(const std::string& assignment_id) const {
  return grades_csv(status(assignment_id));
}

ProjectMetrics ClassroomManager::project_metrics(const std::string& workspace_id) const {
  std::shared_lock lock(mutex_);
  workspace_locked(workspace_id);
  ProjectMetrics m;
  auto it = state_.submissions_by_workspace.find(workspace_id);
  if (it == state_.submissions_by_workspace.end()) return m;
  for (const auto& sid : it->second) {
    const SubmissionRecord& s = state_.submissions.at(sid);
    ++m.submission_count;
    ++m.contributors[s.submitter];
    ++m.weekly[util::iso_week_label(s.submitted_at)];
  }
  return m;
}

const Assignment& ClassroomManager::assignment_locked(const std::string& id) const {
  auto it = state_.assignments.find(id);
  if (it == state_.assignments.end()) not_found("assignment", id, "assignment_id");
  return it->second;
}

const Workspace& ClassroomManager::workspace_locked(const std::string& id) const {
  auto it = state_.workspaces.find(id);
  if (it == state_.workspaces.end()) not_found("workspace", id, "workspace_id");
  return it->second;
}

SubmissionRecord& ClassroomManager::submission_locked(const std::string& id) {
  auto it = state_.submissions.find(id);
  if (it == state_.submissions.end()) not_found("submission", id, "submission_id");
  return it->second;
}

Classroom ClassroomManager::classroom(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = state_.classrooms.find(id);
  if (it == state_.classrooms.end()) not_found("classroom", id, "classroom_id");
  return it->second;
}

std::vector<Classroom> ClassroomManager::classrooms() const {
  std::shared_lock lock(mutex_);
  std::vector<Classroom> out;
  for (const auto& [_, c] : state_.classrooms) out.push_back(c);
  return out;
}

Assignment ClassroomManager::assignment(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return assignment_locked(id);
}

std::vector<Assignment> ClassroomManager::assignments() const {
  std::shared_lock lock(mutex_);
  std::vector<Assignment> out;
  for (const auto& [_, a] : state_.assignments) out.push_back(a);
  return out;
}

Workspace ClassroomManager::workspace(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return workspace_locked(id);
}

std::optional<Workspace> ClassroomManager::find_workspace(const std::string& assignment_id,
                                                          const std::string& owner) const {
  std::shared_lock lock(mutex_);
  auto it = state_.workspace_by_owner.find({assignment_id, owner});
  if (it == state_.workspace_by_owner.end()) return std::nullopt;
  return state_.workspaces.at(it->second);
}

SubmissionRecord ClassroomManager::submission(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = state_.submissions.find(id);
  if (it == state_.submissions.end()) not_found("submission", id, "submission_id");
  return it->second;
}

std::vector<SubmissionRecord> ClassroomManager::submissions(const std::string& workspace_id) const {
  std::shared_lock lock(mutex_);
  workspace_locked(workspace_id);
  std::vector<SubmissionRecord> out;
  auto it = state_.submissions_by_workspace.find(workspace_id);
  if (it == state_.submissions_by_workspace.end()) return out;
  for (const auto& sid : it->second) out.push_back(state_.submissions.at(sid));
  return out;
}

std::optional<SubmissionRecord> ClassroomManager::submission_for_job(const std::string& job_id) const {
  std::shared_lock lock(mutex_);
  auto it = state_.submission_by_job.find(job_id);
  if (it == state_.submission_by_job.end()) return std::nullopt;
  return state_.submissions.at(it->second);
}

std::vector<std::pair<Workspace, SubmissionRecord>> ClassroomManager::latest_submissions(
    const std::string& assignment_id) const {
  std::shared_lock lock(mutex_);
  assignment_locked(assignment_id);
  std::vector<std::pair<Workspace, SubmissionRecord>> out;
  for (const auto& [key, wid] : state_.workspace_by_owner) {
    if (key.first != assignment_id) continue;
    auto it = state_.submissions_by_workspace.find(wid);
    if (it == state_.submissions_by_workspace.end() || it->second.empty()) continue;
    out.emplace_back(state_.workspaces.at(wid), state_.submissions.at(it->second.back()));
  }
  return out;
}

std::vector<SubmissionRecord> ClassroomManager::ungraded() const {
  std::shared_lock lock(mutex_);
  std::vector<SubmissionRecord> out;
  for (const auto& sid : state_.submission_order) {
    const SubmissionRecord& s = state_.submissions.at(sid);
    if (!s.graded()) out.push_back(s);
  }
  return out;
}

}  // namespace gradeforge::classroom
