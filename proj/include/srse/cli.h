#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace srse {

// Entry point of the `srse` executable. `args` excludes the program name.
// Returns the process exit status: 0 success, 2 usage, 3 data mismatch or
// unreadable/corrupt input, 4 numeric failure, 1 anything unexpected.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// key=value lines; blank lines and lines starting with '#' are skipped.
// Underscores in keys read as dashes. Throws UsageError on a malformed line.
std::vector<std::pair<std::string, std::string>> ParseConfigText(const std::string& text,
                                                                 const std::string& origin);

}  // namespace srse
