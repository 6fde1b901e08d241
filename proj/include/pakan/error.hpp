#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pakan {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor dimensions do not satisfy an operation's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values (grid sizes, flags, band indices, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An API was called out of order (e.g. optimizer step without gradients).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Input data outside the accepted domain.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed container file. `offset()` is the byte position of the failure.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace pakan
