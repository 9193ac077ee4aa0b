#pragma once

#include <stdexcept>
#include <string>

namespace rfattn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

/// Configuration is inconsistent or malformed (bad keys, bad values, bad model/bias combination).
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A linear solve or factorization failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateLabels : public Error {
 public:
  using Error::Error;
};

/// The requested quantity has no closed form for this target.
class Unsupported : public Error {
 public:
  using Error::Error;
};

/// An output file exists and overwriting was not requested.
class OutputExists : public Error {
 public:
  using Error::Error;
};

}  // namespace rfattn
