#pragma once

#include <stdexcept>
#include <string>

namespace lesionmetrics {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A value outside its admissible range (probabilities, labels, parameters).
class RangeError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Distances requested between two empty surfaces.
class UndefinedDistances : public Error {
 public:
  using Error::Error;
};

/// Paired test with no nonzero differences.
class DegenerateSample : public Error {
 public:
  using Error::Error;
};

/// Inconsistent inputs to batch evaluation or comparison.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lesionmetrics
