#pragma once

#include <stdexcept>
#include <string>

namespace lyricnn {

// Bad inputs: malformed files, out-of-range arguments, contract violations.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: non-finite losses or gradients, failed gradient checks.
// The CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lyricnn
