#pragma once

#include <stdexcept>
#include <string>

namespace corast {

// Error taxonomy shared by every module. Each maps onto one error class named
// in the interface contracts: configuration, usage, numeric, data, range and
// framing failures.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent shapes, unknown settings, malformed config files.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Caller violated a precondition (non-scalar loss, missing input, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf encountered in a forward or backward pass.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Ingestion failures: missing columns, unparseable cells, too little data.
class DataError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

/// Truncated or corrupt serialized frames / checkpoints.
class DecodeError : public Error {
public:
    using Error::Error;
};

}  // namespace corast
