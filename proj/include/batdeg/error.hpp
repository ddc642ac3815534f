#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace batdeg {

/// Input rejected before any work was done (bad arguments, bad config,
/// out-of-range indices). The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure while running a stage (I/O, corrupt file, backend failure).
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed feature-expression text; carries the byte offset of the problem.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& message, std::size_t offset)
        : ValidationError(message + " at byte " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

} // namespace batdeg
