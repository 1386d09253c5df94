#pragma once

#include <stdexcept>
#include <string>

namespace fairfl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration detected up front, before any computation starts.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Vector/feature length disagreement; message names expected vs actual.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Malformed input data (CSV parse failures carry row/column context).
class DataFormatError : public Error {
public:
    using Error::Error;
};

// Non-finite intermediate, degenerate weights, or an estimator with no
// usable coordinates.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace fairfl
