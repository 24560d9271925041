#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ordfa {

/// Exit codes: 0 success, 1 usage/config/data error, 2 sampler abort.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ordfa
