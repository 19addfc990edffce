#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace veristack::cli {

/// Exit codes: 0 success, 1 partial (some claims failed), 2 fatal.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace veristack::cli
