#pragma once

#include <stdexcept>
#include <string>

namespace drivercal {

// Error taxonomy maps onto CLI exit codes: config/schema/parse -> 2,
// generation -> 3, no-data -> 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class SchemaError : public ConfigError {
 public:
  explicit SchemaError(const std::string& msg) : ConfigError(msg) {}
};

class ParseError : public ConfigError {
 public:
  explicit ParseError(const std::string& msg) : ConfigError(msg) {}
};

class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

class NoDataError : public std::runtime_error {
 public:
  explicit NoDataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace drivercal
