#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pomc {

enum class ErrorKind {
    InvalidParameter,
    InvalidState,
    DimensionMismatch,
    EmptyPath,
    NonConvergence,
    NumericFailure,
    Instability,
    InsufficientData,
    ConfigParse,
    IncompatibleCommand,
    Io,
};

/// Machine-readable name, e.g. "invalid-parameter".
std::string_view to_string(ErrorKind kind);

/// Library-wide exception. The kind drives the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        fail(kind, message);
    }
}

}  // namespace pomc
