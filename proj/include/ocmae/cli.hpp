#pragma once

#include <iosfwd>

namespace ocmae::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

// Entry point for `ocmae <gen-data|train|eval|viz> ...`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ocmae::cli
