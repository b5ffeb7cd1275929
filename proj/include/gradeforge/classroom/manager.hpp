#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "gradeforge/classroom/model.hpp"
#include "gradeforge/classroom/store.hpp"

namespace gradeforge::classroom {

// Deterministic variant choice: SHA-256 of seed followed by owner, first
// eight digest bytes big-endian, modulo the variant count.
int pick_variant(const std::string& seed, const std::string& owner, int variant_count);

// Lifecycle state rebuilt from `events.log` under the data directory. Every
// mutation is validated, appended to the log, then applied with the same
// function replay uses.
class ClassroomManager {
 public:
  struct Options {
    std::filesystem::path data_dir;
    util::ClockFn clock = util::now_utc;
  };

  explicit ClassroomManager(Options options);

  // Warning produced while loading the log, e.g. a truncated last record.
  const std::optional<std::string>& load_warning() const { return load_warning_; }

  Classroom create_classroom(const std::string& name, const std::vector<std::string>& staff);
  // Adds new students and updates names/emails of known ones.
  Classroom import_roster(const std::string& classroom_id, const std::vector<Student>& students);

  Assignment create_assignment(const std::string& classroom_id, const AssignmentConfig& config,
                               std::vector<Variant> variants);

  // Idempotent per (assignment, owner). For group assignments `owner` names
  // the team and `members` must list team_size roster students not already
  // in another team; a repeated accept must name the same members.
  Workspace accept(const std::string& assignment_id, const std::string& owner,
                   const std::vector<std::string>& members = {});

  // Snapshot = current workspace files overlaid with `files`. The returned
  // record carries a fresh job id for the grading queue.
  SubmissionRecord submit(const std::string& workspace_id, const std::string& submitter,
                          const util::FileMap& files,
                          std::optional<util::Timestamp> now = std::nullopt);

  // Grading outcomes; the first one recorded wins.
  void record_report(const std::string& submission_id, const core::GradeReport& report);
  void record_failure(const std::string& submission_id, const std::string& error);

  Feedback add_feedback(const std::string& submission_id, const std::string& author,
                        const std::string& text);

  std::vector<StatusRow> status(const std::string& assignment_id) const;
  std::string export_grades(const std::string& assignment_id) const;
  ProjectMetrics project_metrics(const std::string& workspace_id) const;

  Classroom classroom(const std::string& id) const;
  std::vector<Classroom> classrooms() const;
  Assignment assignment(const std::string& id) const;
  std::vector<Assignment> assignments() const;
  Workspace workspace(const std::string& id) const;
  std::optional<Workspace> find_workspace(const std::string& assignment_id,
                                          const std::string& owner) const;
  SubmissionRecord submission(const std::string& id) const;
  std::vector<SubmissionRecord> submissions(const std::string& workspace_id) const;
  std::optional<SubmissionRecord> submission_for_job(const std::string& job_id) const;
  // Latest submission of every workspace of the assignment.
  std::vector<std::pair<Workspace, SubmissionRecord>> latest_submissions(
      const std::string& assignment_id) const;
  // Submissions with neither report nor failure, oldest first.
  std::vector<SubmissionRecord> ungraded() const;

  util::Timestamp now() const { return clock_(); }

 private:
  struct State {
    std::map<std::string, Classroom> classrooms;
    std::map<std::string, Assignment> assignments;
    std::map<std::string, Workspace> workspaces;
    std::map<std::pair<std::string, std::string>, std::string> workspace_by_owner;
    std::map<std::string, SubmissionRecord> submissions;
    std::map<std::string, std::vector<std::string>> submissions_by_workspace;
    std::map<std::string, std::string> submission_by_job;
    std::vector<std::string> submission_order;
  };

  void commit(nlohmann::json event);
  void apply(const nlohmann::json& event);
  const Assignment& assignment_locked(const std::string& id) const;
  const Workspace& workspace_locked(const std::string& id) const;
  SubmissionRecord& submission_locked(const std::string& id);

  std::filesystem::path data_dir_;
  util::ClockFn clock_;
  BlobStore blobs_;
  std::unique_ptr<EventLog> log_;
  std::optional<std::string> load_warning_;
  std::int64_t seq_ = 0;
  mutable std::shared_mutex mutex_;
  State state_;
};

}  // namespace gradeforge::classroom
