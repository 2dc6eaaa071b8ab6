#pragma once

#include <stdexcept>
#include <string>

namespace t2f {

// Base for every error the library raises. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent on-disk data (assets, weights, datasets, OBJ).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Argument shapes that do not agree with a model or profile.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Data-level failures: empty datasets, divergence, bad records.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace t2f
