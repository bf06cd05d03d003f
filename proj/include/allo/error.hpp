// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace allo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform to an operation's rules.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value, missing field or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Sequence does not fit the model context.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Token id outside the vocabulary.
class VocabError : public Error {
 public:
  using Error::Error;
};

/// Text contains a unit outside the tokenizer alphabet.
class EncodingError : public Error {
 public:
  EncodingError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Malformed input record.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Synthetic task cannot produce the requested number of distinct examples.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Token scorer could not produce keep-probabilities.
class ScorerError : public Error {
 public:
  using Error::Error;
};

/// A test oracle detected that its own assumptions do not hold.
class OracleError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint / tensor-container load and store failures.
class CheckpointError : public Error {
 public:
  enum class Kind { io, version_mismatch, corrupted, config_mismatch, shape_mismatch };
  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace allo
