#pragma once

// Command-line frontend. Exit codes: 0 success, 2 invalid input or
// configuration, 3 numerical failure.

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace vacfilter::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Flat key=value configuration file. Blank lines and lines starting with
/// '#' are ignored; keys are long option names without dashes.
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Runs the tool. Values from the file named by VACFILTER_CONFIG fill in
/// options not given on the command line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vacfilter::cli
