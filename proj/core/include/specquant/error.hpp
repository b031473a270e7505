// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace specquant {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file header or byte layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Dimensions or dtype do not match what the operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise invalid element values.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Caller passed an out-of-range parameter.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace specquant
