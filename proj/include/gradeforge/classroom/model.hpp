#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradeforge/core/report.hpp"
#include "gradeforge/core/test_suite.hpp"
#include "gradeforge/util/files.hpp"
#include "gradeforge/util/time.hpp"

namespace gradeforge::classroom {

struct Student {
  std::string id;
  std::string name;
  std::string email;
  bool operator==(const Student&) const = default;
};

struct Classroom {
  std::string id;
  std::string name;
  std::vector<Student> roster;
  std::vector<std::string> staff;
  util::Timestamp created_at;

  const Student* find_student(const std::string& id) const;
};

enum class Mode { individual, group };
enum class Visibility { private_repo, public_repo };
enum class LatePolicy { reject, accept_flagged };
enum class ScoringPolicy { best, latest };

struct AssignmentConfig {
  std::string title;
  util::Timestamp deadline;
  Mode mode = Mode::individual;
  std::optional<int> team_size;  // present iff mode == group
  Visibility visibility = Visibility::private_repo;
  LatePolicy late_policy = LatePolicy::accept_flagged;
  ScoringPolicy scoring = ScoringPolicy::best;
  std::optional<std::string> seed;      // defaults to the assignment id
  std::optional<std::string> language;  // compile hint for graded jobs

  // Throws Error(validation) for inconsistent settings.
  void validate() const;
};

// {"title", "deadline", "mode": "individual" | "group", "team_size",
//  "visibility", "late_policy", "scoring", "seed", "language"}
AssignmentConfig assignment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AssignmentConfig& c);

struct Variant {
  util::FileMap template_files;
  core::TestSuite suite;
};

struct Assignment {
  std::string id;
  std::string classroom_id;
  AssignmentConfig config;
  std::string seed;
  std::vector<Variant> variants;
  util::Timestamp created_at;

  int max_points() const { return variants.front().suite.max_points(); }
};

// Builds variants from an uploaded tree: `template/...`, `autograde.spec`,
// and optional `variants/<n>/template/...` + `variants/<n>/autograde.spec`.
// Variant 0 is the base; each numbered variant overlays its files on the base
// template and replaces the spec when it has one. Throws Error(validation) or
// Error(suite).
std::vector<Variant> variants_from_tree(const util::FileMap& tree);

struct Workspace {
  std::string id;
  std::string assignment_id;
  std::string owner;                 // student id, or team name
  std::vector<std::string> members;  // the student itself when individual
  int variant_index = 0;
  util::FileMap files;  // current snapshot
  util::Timestamp created_at;
};

struct Feedback {
  std::string author;
  std::string text;
  util::Timestamp created_at;
};

struct SubmissionRecord {
  std::string id;
  std::string workspace_id;
  std::string submitter;
  int sequence = 0;
  util::Timestamp submitted_at;
  bool late = false;
  util::FileMap files;
  std::string snapshot_hash;
  std::string job_id;
  std::optional<core::GradeReport> report;
  std::optional<std::string> grading_error;
  std::vector<Feedback> feedback;

  bool graded() const { return report.has_value() || grading_error.has_value(); }
};

struct StatusRow {
  std::string owner;
  std::vector<std::string> members;
  std::optional<std::string> workspace_id;
  bool accepted = false;
  bool submitted = false;
  bool passed = false;
  int points = 0;
  int max_points = 0;
  std::optional<util::Timestamp> last_submission_at;

  bool operator==(const StatusRow&) const = default;
};

struct ProjectMetrics {
  int submission_count = 0;
  std::map<std::string, int> contributors;
  std::map<std::string, int> weekly;  // ISO week label -> submissions
};

std::string_view to_string(Mode m);
std::string_view to_string(Visibility v);
std::string_view to_string(LatePolicy p);
std::string_view to_string(ScoringPolicy p);

nlohmann::json to_json(const Classroom& c);
nlohmann::json to_json(const Assignment& a);  // without file contents
nlohmann::json to_json(const Workspace& w, bool with_files = false);
nlohmann::json to_json(const SubmissionRecord& s, bool with_files = false);
nlohmann::json to_json(const StatusRow& r);
StatusRow status_row_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProjectMetrics& m);

// Grade export header and rows, RFC 4180 with CRLF line ends.
inline constexpr const char* kGradesHeader =
    "owner,accepted,submitted,passed,points,max_points,last_submission_at";
std::string grades_csv(const std::vector<StatusRow>& rows);

// Roster CSV with a header containing `id` (or `student_id`) and optionally
// `name`, `email`. Throws Error(validation) on duplicate or empty ids.
std::vector<Student> parse_roster_csv(std::string_view text);

}  // namespace gradeforge::classroom
