#pragma once

#include <stdexcept>
#include <string>

namespace suffixforge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// shape mismatch between operands; message names the offending shapes
class DimensionError : public Error {
public:
    using Error::Error;
};

// value outside the documented domain (empty input, index out of range, ...)
class DomainError : public Error {
public:
    using Error::Error;
};

// malformed file contents (bad magic, truncated payload, bad header)
class FormatError : public Error {
public:
    using Error::Error;
};

// invalid or unknown run-configuration contents
class ConfigError : public Error {
public:
    using Error::Error;
};

// dataset-level problems (unknown class label, class too small, ...)
class DatasetError : public Error {
public:
    using Error::Error;
};

// zero-norm vector where a direction is required
class DegenerateEncodingError : public Error {
public:
    using Error::Error;
};

// a construction self-check failed; indicates a bug, not bad input
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace suffixforge
