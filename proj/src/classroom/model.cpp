#include "gradeforge/classroom/model.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "gradeforge/error.hpp"
#include "gradeforge/util/csv.hpp"

namespace gradeforge::classroom {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::validation, field + ": " + what, field);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

json optional_time(const std::optional<util::Timestamp>& t) {
  return t ? json(util::format_iso8601(*t)) : json(nullptr);
}

template <typename E>
E enum_field(const json& j, const char* key, E fallback,
             std::initializer_list<std::pair<const char*, E>> values) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_string()) invalid(key, "must be a string");
  for (const auto& [name, value] : values) {
    if (*it == name) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : values) allowed += std::string(allowed.empty() ? "" : ", ") + name;
  invalid(key, "unknown value '" + it->get<std::string>() + "' (expected " + allowed + ")");
}

}  // namespace

const Student* Classroom::find_student(const std::string& sid) const {
  auto it = std::find_if(roster.begin(), roster.end(), [&](const Student& s) { return s.id == sid; });
  return it == roster.end() ? nullptr : &*it;
}

std::string_view to_string(Mode m) { return m == Mode::group ? "group" : "individual"; }
std::string_view to_string(Visibility v) {
  return v == Visibility::public_repo ? "public" : "private";
}
std::string_view to_string(LatePolicy p) {
  return p == LatePolicy::reject ? "reject" : "accept_flagged";
}
std::string_view to_string(ScoringPolicy p) { return p == ScoringPolicy::latest ? "latest" : "best"; }

void AssignmentConfig::validate() const {
  if (title.empty()) invalid("title", "must be non-empty");
  if (mode == Mode::group) {
    if (!team_size) invalid("team_size", "group mode requires team_size");
    if (*team_size < 2) invalid("team_size", "must be at least 2");
  } else if (team_size) {
    invalid("team_size", "only allowed in group mode");
  }
  if (seed && seed->empty()) invalid("seed", "must be non-empty when given");
}

AssignmentConfig assignment_config_from_json(const json& j) {
  if (!j.is_object()) invalid("config", "must be an object");
  static const std::set<std::string> known = {"title",       "deadline", "mode",    "team_size",
                                              "visibility",  "late_policy", "scoring", "seed",
                                              "language"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) invalid(key, "unknown key");
  }
  AssignmentConfig c;
  if (!j.contains("title") || !j["title"].is_string()) invalid("title", "required string");
  c.title = j["title"].get<std::string>();
  if (!j.contains("deadline") || !j["deadline"].is_string()) {
    invalid("deadline", "required ISO-8601 timestamp");
  }
  try {
    c.deadline = util::parse_iso8601(j["deadline"].get<std::string>());
  } catch (const Error& e) {
    invalid("deadline", e.what());
  }
  // "group:3" is accepted as shorthand for mode + team_size.
  if (auto it = j.find("mode"); it != j.end() && it->is_string() &&
                                it->get<std::string>().rfind("group:", 0) == 0) {
    c.mode = Mode::group;
    try {
      c.team_size = std::stoi(it->get<std::string>().substr(6));
    } catch (...) {
      invalid("mode", "malformed team size in '" + it->get<std::string>() + "'");
    }
  } else {
    c.mode = enum_field(j, "mode", Mode::individual,
                        {{"individual", Mode::individual}, {"group", Mode::group}});
  }
  if (auto it = j.find("team_size"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) invalid("team_size", "must be an integer");
    c.team_size = it->get<int>();
  }
  c.visibility = enum_field(j, "visibility", Visibility::private_repo,
                            {{"private", Visibility::private_repo},
                             {"public", Visibility::public_repo}});
  c.late_policy = enum_field(j, "late_policy", LatePolicy::accept_flagged,
                             {{"reject", LatePolicy::reject},
                              {"accept_flagged", LatePolicy::accept_flagged}});
  c.scoring = enum_field(j, "scoring", ScoringPolicy::best,
                         {{"best", ScoringPolicy::best}, {"latest", ScoringPolicy::latest}});
  for (auto [key, dest] : {std::pair{"seed", &c.seed}, std::pair{"language", &c.language}}) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) continue;
    if (!it->is_string()) invalid(key, "must be a string");
    *dest = it->get<std::string>();
  }
  c.validate();
  return c;
}

json to_json(const AssignmentConfig& c) {
  json j = {{"title", c.title},
            {"deadline", util::format_iso8601(c.deadline)},
            {"mode", std::string(to_string(c.mode))},
            {"visibility", std::string(to_string(c.visibility))},
            {"late_policy", std::string(to_string(c.late_policy))},
            {"scoring", std::string(to_string(c.scoring))}};
  if (c.team_size) j["team_size"] = *c.team_size;
  if (c.seed) j["seed"] = *c.seed;
  if (c.language) j["language"] = *c.language;
  return j;
}

std::vector<Variant> variants_from_tree(const util::FileMap& tree) {
  util::FileMap base_template;
  std::optional<std::string> base_spec;
  // variant number -> (template overlay, spec)
  std::map<int, std::pair<util::FileMap, std::optional<std::string>>> numbered;
  for (const auto& [raw_path, data] : tree) {
    std::string path = util::checked_relative_path(raw_path);
    if (path == "autograde.spec") {
      base_spec = data;
    } else if (path.rfind("template/", 0) == 0) {
      base_template[path.substr(9)] = data;
    } else if (path.rfind("variants/", 0) == 0) {
      auto rest = path.substr(9);
      auto slash = rest.find('/');
      if (slash == std::string::npos) invalid(path, "unexpected file in variants/");
      const std::string num = rest.substr(0, slash);
      if (num.empty() || num.size() > 6 ||
          num.find_first_not_of("0123456789") != std::string::npos) {
        invalid(path, "variant directories must be numbered");
      }
      auto& slot = numbered[std::stoi(num)];
      auto inner = rest.substr(slash + 1);
      if (inner == "autograde.spec") slot.second = data;
      else if (inner.rfind("template/", 0) == 0) slot.first[inner.substr(9)] = data;
      else invalid(path, "expected template/ or autograde.spec inside a variant");
    } else {
      invalid(path, "expected template/, autograde.spec or variants/");
    }
  }
  if (!base_spec) invalid("autograde.spec", "missing test suite");
  if (base_template.empty()) invalid("template", "empty template");

  auto parse = [](const std::string& text, const std::string& where) {
    try {
      return core::parse_suite(text);
    } catch (const Error& e) {
      throw Error(ErrorKind::suite, where + ": " + e.what(), e.field());
    }
  };
  std::vector<Variant> out;
  out.push_back({base_template, parse(*base_spec, "autograde.spec")});
  for (const auto& [n, slot] : numbered) {
    util::FileMap files = base_template;
    for (const auto& [p, d] : slot.first) files[p] = d;
    out.push_back({std::move(files),
                   slot.second ? parse(*slot.second, "variants/" + std::to_string(n) + "/autograde.spec")
                               : out.front().suite});
  }
  return out;
}

json to_json(const Classroom& c) {
  json roster = json::array();
  for (const auto& s : c.roster) roster.push_back({{"id", s.id}, {"name", s.name}, {"email", s.email}});
  return {{"id", c.id},
          {"name", c.name},
          {"staff", c.staff},
          {"roster", roster},
          {"created_at", util::format_iso8601(c.created_at)}};
}

json to_json(const Assignment& a) {
  json variants = json::array();
  for (const auto& v : a.variants) {
    json files = json::array();
    for (const auto& [p, _] : v.template_files) files.push_back(p);
    json tests = json::array();
    for (const auto& t : v.suite.tests()) tests.push_back({{"name", t.name}, {"points", t.points}});
    variants.push_back({{"files", files}, {"tests", tests}, {"max_points", v.suite.max_points()}});
  }
  json j = {{"id", a.id},
            {"classroom_id", a.classroom_id},
            {"config", to_json(a.config)},
            {"seed", a.seed},
            {"max_points", a.max_points()},
            {"variants", variants},
            {"created_at", util::format_iso8601(a.created_at)}};
  return j;
}

namespace {

json files_json(const util::FileMap& files, bool with_content) {
  if (!with_content) {
    json names = json::array();
    for (const auto& [p, _] : files) names.push_back(p);
    return names;
  }
  json obj = json::object();
  for (const auto& [p, d] : files) obj[p] = d;
  return obj;
}

}  // namespace

json to_json(const Workspace& w, bool with_files) {
  return {{"id", w.id},
          {"assignment_id", w.assignment_id},
          {"owner", w.owner},
          {"members", w.members},
          {"variant_index", w.variant_index},
          {"files", files_json(w.files, with_files)},
          {"created_at", util::format_iso8601(w.created_at)}};
}

json to_json(const SubmissionRecord& s, bool with_files) {
  json feedback = json::array();
  for (const auto& f : s.feedback) {
    feedback.push_back(
        {{"author", f.author}, {"text", f.text}, {"created_at", util::format_iso8601(f.created_at)}});
  }
  json j = {{"id", s.id},
            {"workspace_id", s.workspace_id},
            {"submitter", s.submitter},
            {"sequence", s.sequence},
            {"submitted_at", util::format_iso8601(s.submitted_at)},
            {"late", s.late},
            {"files", files_json(s.files, with_files)},
            {"snapshot_hash", s.snapshot_hash},
            {"job_id", s.job_id},
            {"report", s.report ? core::to_json(*s.report) : json(nullptr)},
            {"feedback", feedback}};
  if (s.grading_error) j["grading_error"] = *s.grading_error;
  return j;
}

json to_json(const StatusRow& r) {
  return {{"owner", r.owner},
          {"members", r.members},
          {"workspace_id", r.workspace_id ? json(*r.workspace_id) : json(nullptr)},
          {"accepted", r.accepted},
          {"submitted", r.submitted},
          {"passed", r.passed},
          {"points", r.points},
          {"max_points", r.max_points},
          {"last_submission_at", optional_time(r.last_submission_at)}};
}

StatusRow status_row_from_json(const json& j) {
  StatusRow r;
  r.owner = j.at("owner").get<std::string>();
  if (j.contains("members")) r.members = j["members"].get<std::vector<std::string>>();
  if (j.contains("workspace_id") && j["workspace_id"].is_string()) {
    r.workspace_id = j["workspace_id"].get<std::string>();
  }
  r.accepted = j.at("accepted").get<bool>();
  r.submitted = j.at("submitted").get<bool>();
  r.passed = j.at("passed").get<bool>();
  r.points = j.at("points").get<int>();
  r.max_points = j.at("max_points").get<int>();
  if (j.contains("last_submission_at") && j["last_submission_at"].is_string()) {
    r.last_submission_at = util::parse_iso8601(j["last_submission_at"].get<std::string>());
  }
  return r;
}

json to_json(const ProjectMetrics& m) {
  return {{"submission_count", m.submission_count},
          {"contributors", m.contributors},
          {"weekly", m.weekly}};
}

std::string grades_csv(const std::vector<StatusRow>& rows) {
  std::vector<const StatusRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const StatusRow* a, const StatusRow* b) { return a->owner < b->owner; });
  std::string out = std::string(kGradesHeader) + "\r\n";
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  for (const StatusRow* r : sorted) {
    std::string last;
    if (r->last_submission_at) {
      last = util::format_iso8601(std::chrono::floor<std::chrono::seconds>(*r->last_submission_at));
    }
    out += util::csv_row({r->owner, flag(r->accepted), flag(r->submitted), flag(r->passed),
                          std::to_string(r->points), std::to_string(r->max_points), last});
  }
  return out;
}

std::vector<Student> parse_roster_csv(std::string_view text) {
  auto records = util::parse_csv(text);
  // Drop blank lines.
  records.erase(std::remove_if(records.begin(), records.end(),
                               [](const auto& r) { return r.size() == 1 && r[0].empty(); }),
                records.end());
  if (records.empty()) invalid("roster", "missing header line");
  int id_col = -1, name_col = -1, email_col = -1;
  for (std::size_t i = 0; i < records[0].size(); ++i) {
    std::string h = lower(records[0][i]);
    h.erase(std::remove_if(h.begin(), h.end(), [](unsigned char c) { return std::isspace(c); }),
            h.end());
    if (h == "id" || h == "student_id") id_col = static_cast<int>(i);
    else if (h == "name") name_col = static_cast<int>(i);
    else if (h == "email") email_col = static_cast<int>(i);
  }
  if (id_col < 0) invalid("roster", "header needs an 'id' column");
  std::vector<Student> out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto cell = [&](int col) { return col >= 0 && std::size_t(col) < rec.size() ? rec[col] : ""; };
    Student s{cell(id_col), cell(name_col), cell(email_col)};
    const std::string where = "roster line " + std::to_string(r + 1);
    if (s.id.empty()) invalid(where, "empty student id");
    if (!seen.insert(s.id).second) invalid(where, "duplicate student id '" + s.id + "'");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gradeforge::classroom
