#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace smart {

using json = nlohmann::json;

// Input that violates a precondition (bad latitude, malformed config, ...).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Failure while talking to an external source (tile endpoint, files).
class FetchError : public std::runtime_error {
 public:
  explicit FetchError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

// Persisted artifact is incomplete or from another schema version.
class IntegrityError : public std::runtime_error {
 public:
  explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

class VersionError : public std::runtime_error {
 public:
  explicit VersionError(const std::string& what) : std::runtime_error(what) {}
};

using Rng = std::mt19937_64;

}  // namespace smart
