#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kmpa::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kInternalError = 1,
    kConfigError = 2,
    kDataError = 3,
    kSolverError = 4,  ///< non-convergence or divergence
    kBankrupt = 5,
};

/// Environment variable consulted for relative --data paths that do not exist
/// in the working directory.
inline constexpr const char* kDataDirEnv = "KMPA_DATA_DIR";

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kmpa::cli
