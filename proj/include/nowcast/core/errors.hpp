#pragma once

#include <stdexcept>
#include <string>

namespace nowcast {

/// Bad inputs, bad config, contract violations. CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A release was refused (e.g. dirty leakage verdict). CLI maps this to exit code 3.
class RefusedReleaseError : public std::runtime_error {
 public:
  explicit RefusedReleaseError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure inside a fit (divergence, non-convergence, singularity).
class FitError : public std::runtime_error {
 public:
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nowcast
