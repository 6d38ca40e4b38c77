#pragma once

// Command-line front end. Exit status: 0 success, 1 domain error (message on
// `err`), 2 usage error.

#include <iosfwd>
#include <string>
#include <vector>

namespace clonematch {

// `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clonematch
