#include <iostream>

#include "gradeforge/cli/cli.hpp"

int main(int argc, char** argv) { return gradeforge::cli::run(argc, argv, std::cout, std::cerr); }
