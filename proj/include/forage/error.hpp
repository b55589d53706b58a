#pragma once

#include <stdexcept>
#include <string>

namespace forage {

// Invalid user input: malformed maps, bad scenario fields, schema mismatches.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Failure while processing otherwise well-formed inputs: truncated trace
// files, replay divergence, spawn rejection. The CLI maps this to exit code 1.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

// A metric evaluated where its value is not defined (zero denominator).
class UndefinedMetric : public std::domain_error {
 public:
  explicit UndefinedMetric(const std::string& what) : std::domain_error(what) {}
};

}  // namespace forage
