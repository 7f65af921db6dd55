#pragma once

#include <stdexcept>
#include <string>

namespace corefdiffs {

// Bad inputs: schema violations, dangling references, conflicting flags.
// The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures at run time: I/O, divergence, non-finite values. Exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace corefdiffs
