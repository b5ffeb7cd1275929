#pragma once

#include <filesystem>
#include <string>

#include "gradeforge/core/test_suite.hpp"
#include "gradeforge/util/files.hpp"

namespace gradeforge::testing {

inline std::filesystem::path iris_dir() {
  return std::filesystem::path(GRADEFORGE_SOURCE_DIR) / "fixtures" / "iris";
}

inline core::TestSuite iris_suite() {
  return core::parse_suite(util::read_file(iris_dir() / "autograde.spec"));
}

inline util::FileMap iris_template() { return util::read_tree(iris_dir() / "template"); }

// Template overlaid with the reference solution.
inline util::FileMap iris_solution() {
  auto files = iris_template();
  for (auto& [path, data] : util::read_tree(iris_dir() / "solution")) files[path] = data;
  return files;
}

// Reference solution whose regression.py is the unfinished starter file.
inline util::FileMap iris_regression_stubbed() {
  auto files = iris_solution();
  files["regression.py"] = iris_template().at("regression.py");
  return files;
}

}  // namespace gradeforge::testing
