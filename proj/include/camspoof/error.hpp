#pragma once

#include <stdexcept>
#include <string>

namespace camspoof {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Frame or template dimensions violate a shape constraint.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An operation had nothing to produce (e.g. payload shorter than one row).
class EmptyResultError : public Error {
 public:
  using Error::Error;
};

// Malformed wire bytes.
class ParseError : public Error {
 public:
  enum class Kind { BadMagic, UnknownType, LengthMismatch, InvalidField };

  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Packet stream does not follow leader/payload/trailer framing.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration, plan, or scenario.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Scenario JSON violates the schema; `path()` names the offending field.
class SchemaError : public ConfigError {
 public:
  SchemaError(std::string path, const std::string& msg)
      : ConfigError(path + ": " + msg), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace camspoof
