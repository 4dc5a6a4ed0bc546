#pragma once

#include <stdexcept>
#include <string>

namespace relsal {

// Base for every error raised by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value fell outside its admissible range (agreement > N, k outside [1, N], ...).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Raster or tensor dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A structural invariant of the input does not hold (non-nested stack, duplicate ids, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// A quantity is mathematically undefined for the given input
// (correlation with n < 2, AP without positives, ROC on a one-class slice).
class UndefinedError : public Error {
 public:
  using Error::Error;
};

// File system or file format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace relsal
