#pragma once

#include <stdexcept>
#include <string>

namespace shiftlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents disagree; the message names the offending axis.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input values violate an operation's contract.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Model, encoder or generator configuration is unusable.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Rejection sampling could not place a scene.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace shiftlab
