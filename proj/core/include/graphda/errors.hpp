#pragma once

#include <stdexcept>
#include <string>

namespace graphda {

// Bad inputs: malformed files, shape mismatches, out-of-range config values.
// The CLI maps these to exit code 1; other runtime errors map to 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace graphda
