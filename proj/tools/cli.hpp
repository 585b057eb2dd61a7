// CLI entry point, exposed as a function so tests can drive it directly.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lucy {

// args excludes the program name. Returns the process exit code:
// 0 success, 2 input/usage error, 1 unexpected failure.
int cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

} // namespace lucy
