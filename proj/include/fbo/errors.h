#pragma once

#include <stdexcept>
#include <string>

namespace fbo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotHurwitz : public Error {
 public:
  using Error::Error;
};

class NotDetectable : public Error {
 public:
  using Error::Error;
};

class InvalidStep : public Error {
 public:
  using Error::Error;
};

class MissingEstimate : public Error {
 public:
  using Error::Error;
};

class NonFiniteState : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario or plant file.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace fbo
