#pragma once

#include <stdexcept>
#include <string>

namespace dktax {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside an operation's domain (bad factor, overlapping bounds, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed or invariant-breaking input data. Carries the 1-based data row
/// when the problem can be pinned to one (0 otherwise).
class DataError : public Error {
public:
    DataError(const std::string& msg, std::size_t row = 0)
        : Error(row ? "row " + std::to_string(row) + ": " + msg : msg), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Regression design cannot be estimated (collinear, too few clusters,
/// absent instrument).
class EstimationError : public Error {
public:
    using Error::Error;
};

}  // namespace dktax
