#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace iglu::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kDomainFailure = 1, kUsageOrIo = 2 };

/// Runs `iglu <args...>` (args excludes the program name) writing to the
/// given streams. serve installs SIGINT/SIGTERM handlers and blocks.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace iglu::cli
