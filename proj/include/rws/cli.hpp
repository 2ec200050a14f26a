#pragma once
#include <string>
#include <vector>

namespace rws {

// Full command-line surface (train / eval / sample / analyze). Returns the
// process exit code; never throws. Exposed this way so tests can drive the
// real interface in-process.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, char** argv);

}  // namespace rws
