#pragma once

#include <iosfwd>
#include <string>
#include <vector>

/// Command-line entry point: forge, evaluate, score, cdist, analyze-embeddings,
/// report and validate-config.
namespace ceval::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// `args` excludes the program name. Never throws; errors map to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ceval::cli
