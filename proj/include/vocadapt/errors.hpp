#pragma once

#include <stdexcept>
#include <string>

namespace vocadapt {

// Base class for all toolkit errors. Subclasses map onto CLI exit codes:
// DataError/ParseError -> 2, IoError -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violation in data handed to an operation (bad shapes, empty
// intersections, invariant breaches).
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Malformed file content. Carries a 1-based line number when known.
class ParseError : public DataError {
public:
    ParseError(const std::string& msg, std::size_t line = 0)
        : DataError(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Filesystem / stream failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace vocadapt
