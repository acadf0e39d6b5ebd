#ifndef GECW_TOOLS_CLI_H_
#define GECW_TOOLS_CLI_H_

#include <string>
#include <vector>

namespace gecw::cli {

// Runs one `gecw` invocation; args excludes the program name. Returns the
// process exit code. Errors are printed to stderr.
int Run(const std::vector<std::string>& args);

}  // namespace gecw::cli

#endif  // GECW_TOOLS_CLI_H_
