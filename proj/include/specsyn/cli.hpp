#pragma once

#include <string>
#include <vector>

namespace specsyn::cli {

// Runs one subcommand; returns the process exit status.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace specsyn::cli
