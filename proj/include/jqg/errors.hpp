// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace jqg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument or configuration outside an operation's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class EtaOutOfRange : public Error {
 public:
  using Error::Error;
};

// Numeric degeneracy (zero-variance channel, single-class AUC input, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class DegenerateChannel : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

// File format problems.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public FormatError {
 public:
  using FormatError::FormatError;
};

class SizeMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedVersion : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace jqg
