#ifndef PHONOLID_TOOLS_CLI_H_
#define PHONOLID_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace phonolid::cli {

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // runtime error (I/O, training, data)
constexpr int kExitUsage = 2;    // bad flags or invalid configuration

// Runs `phonolid <args...>`; args excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace phonolid::cli

#endif  // PHONOLID_TOOLS_CLI_H_
