#include "gradeforge/sandbox/languages.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "gradeforge/error.hpp"

namespace gradeforge::sandbox {

namespace {

constexpr const char* kDefaultRegistry = R"([
  {"id": "python3", "display_name": "Python 3", "extension": ".py",
   "run": "python3 {main}", "probe": "python3 --version"},
  {"id": "c", "display_name": "C", "extension": ".c",
   "compile": "gcc -std=c11 -O2 -Wall -o {out} {src} -lm", "run": "./{main}",
   "probe": "gcc --version"},
  {"id": "cpp", "display_name": "C++", "extension": ".cpp",
   "compile": "g++ -std=c++17 -O2 -Wall -o {out} {src}", "run": "./{main}",
   "probe": "g++ --version"},
  {"id": "java", "display_name": "Java", "extension": ".java", "main_file": "Main.java",
   "compile": "javac {src}", "run": "java -cp . {main}", "probe": "javac -version"}
])";

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

[[noreturn]] void config_error(std::size_t index, const std::string& key,
                               const std::string& what) {
  std::string field = "languages[" + std::to_string(index) + "]." + key;
  throw Error(ErrorKind::config, field + ": " + what, field);
}

}  // namespace

std::string LanguageSpec::main_stem() const {
  auto dot = main_file.rfind('.');
  return dot == std::string::npos ? main_file : main_file.substr(0, dot);
}

std::string LanguageSpec::run_command() const {
  return replace_all(run_command_template, "{main}",
                     compiled() ? main_stem() : main_file);
}

LanguageRegistry LanguageRegistry::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::config, std::string("language registry: ") + e.what(), "languages");
  }
  if (!doc.is_array()) {
    throw Error(ErrorKind::config, "language registry must be an array", "languages");
  }
  LanguageRegistry reg;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    if (!e.is_object()) config_error(i, "", "must be an object");
    auto str = [&](const char* key, bool required) -> std::optional<std::string> {
      auto it = e.find(key);
      if (it == e.end() || it->is_null()) {
        if (required) config_error(i, key, "missing required key");
        return std::nullopt;
      }
      if (!it->is_string() || it->get<std::string>().empty()) {
        config_error(i, key, "must be a non-empty string");
      }
      return it->get<std::string>();
    };
    LanguageSpec spec;
    spec.id = *str("id", true);
    spec.display_name = str("display_name", false).value_or(spec.id);
    spec.source_extension = *str("extension", true);
    if (spec.source_extension.front() != '.') spec.source_extension.insert(0, ".");
    spec.main_file = str("main_file", false).value_or("main" + spec.source_extension);
    spec.compile_command = str("compile", false);
    spec.run_command_template = *str("run", true);
    spec.version_probe = str("probe", false).value_or("");
    if (!ids.insert(spec.id).second) config_error(i, "id", "duplicate language id '" + spec.id + "'");
    reg.languages_.push_back(std::move(spec));
  }
  return reg;
}

LanguageRegistry LanguageRegistry::load_file(const std::string& path) {
  return from_json(util::read_file(path));
}

LanguageRegistry LanguageRegistry::defaults() { return from_json(kDefaultRegistry); }

const LanguageSpec* LanguageRegistry::find(std::string_view id) const {
  auto it = std::find_if(languages_.begin(), languages_.end(),
                         [&](const LanguageSpec& l) { return l.id == id; });
  return it == languages_.end() ? nullptr : &*it;
}

ExecResult compile_if_needed(Sandbox& sandbox, const LanguageSpec& lang,
                             const Workspace& workspace, const ExecLimits& limits) {
  if (!lang.compiled()) {
    ExecResult r;
    r.outcome = Outcome::ok;
    r.exit_code = 0;
    return r;
  }
  std::vector<std::string> sources;
  for (const auto& entry : std::filesystem::directory_iterator(workspace.path())) {
    if (entry.is_regular_file() && entry.path().extension() == lang.source_extension) {
      sources.push_back(entry.path().filename().string());
    }
  }
  if (sources.empty()) {
    throw Error(ErrorKind::validation,
                "no " + lang.source_extension + " sources in workspace", "files");
  }
  std::sort(sources.begin(), sources.end());
  std::string src;
  for (const auto& s : sources) {
    if (!src.empty()) src.push_back(' ');
    src += shell_quote(s);
  }
  std::string cmd = replace_all(*lang.compile_command, "{src}", src);
  cmd = replace_all(std::move(cmd), "{out}", shell_quote(lang.main_stem()));
  ExecRequest req;
  req.command = std::move(cmd);
  req.workdir = workspace.path();
  req.limits = limits;
  req.limits.network_allowed = false;
  return sandbox.execute(req);
}

}  // namespace gradeforge::sandbox
