#pragma once

namespace corefdiffs::cli {

// Exit codes: 0 success, 1 validation error, 2 runtime failure.
int run(int argc, const char* const* argv);

}  // namespace corefdiffs::cli
