#pragma once

#include <stdexcept>
#include <string>

namespace scfe {

// Bad shapes, out-of-range parameters, empty inputs.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed model files, CSV tables, config files.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values produced during optimization or fitting.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace scfe
