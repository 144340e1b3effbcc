#pragma once

#include <stdexcept>
#include <string>

namespace dynssep {

// Bad inputs: malformed configs, out-of-range parameters, schema mismatches.
// The CLI maps this to exit code 1.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// A computation failed its own accuracy contract (row-sum drift, quadrature
// that will not settle, non-positive-definite covariance where one is
// required). The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dynssep
