#pragma once

#include <iosfwd>

namespace normkit {

// Exit codes: 0 success, 1 usage error, 2 data error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace normkit
