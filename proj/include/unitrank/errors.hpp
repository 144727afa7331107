#pragma once

#include <stdexcept>
#include <string>

namespace unitrank {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: missing or malformed files, invalid settings. The CLI maps
/// these to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

/// The reasoner backend failed (transport, HTTP status, unusable output).
class BackendError : public Error {
public:
    using Error::Error;
};

/// Formats "<path>:<line>: <message>".
std::string at_line(const std::string& path, std::size_t line, const std::string& message);

}  // namespace unitrank
