#pragma once

#include <iosfwd>

namespace mmgr::cli {

/// Runs one command line. Returns the process exit code: 0 on success,
/// 2 for usage or input errors, 3 for runtime failures. Data goes to `out`;
/// the resolved config and errors go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mmgr::cli
