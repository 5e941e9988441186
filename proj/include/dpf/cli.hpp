#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dpf/errors.hpp"

namespace dpf::cli {

/// Exit codes: 0 success, 1 a verification ran and failed, 2 usage,
/// 3 data or I/O, 4 numeric, 5 capacity.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitCapacity = 5;

int exit_code_for(ErrorKind kind);

/// Worker threads from DPF_WORKERS, else the hardware concurrency.
int worker_count();

/// Runs one subcommand. `args` excludes the program name. Reports go to
/// `out`, diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main_entry(int argc, char** argv);

}  // namespace dpf::cli
