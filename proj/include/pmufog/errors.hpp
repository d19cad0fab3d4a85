#pragma once

#include <stdexcept>
#include <string>

namespace pmufog {

/// Invalid configuration; the message names the violated bound.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Series or matrix dimensions are incompatible with the requested operation.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Not enough samples to place a target/test window.
class WindowError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

/// A detector was used before calibration or training.
class CalibrationError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Training or evaluation input does not satisfy the model's requirements.
class DatasetError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// PDC alignment received an arrival it cannot accept.
class ProtocolError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace pmufog
