#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace adacon::cli {

/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, const char* const* argv);

}  // namespace adacon::cli
