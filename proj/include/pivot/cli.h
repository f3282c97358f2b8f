#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace pivot {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

// Runs one command line (args excludes the program name). Returns 0 on
// success, 1 on usage or configuration errors, 2 on runtime failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Root for run directories: $PIVOT_TOUCH_RUNS_DIR, else ./runs.
std::filesystem::path runs_root();

// Creates runs_root()/<UTC timestamp>-<tag>, adding a numeric suffix rather
// than reusing an existing directory.
std::filesystem::path make_run_dir(const std::string& tag);

}  // namespace pivot
