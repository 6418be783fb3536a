#include "pomc/error.hpp"

namespace pomc {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidParameter: return "invalid-parameter";
        case ErrorKind::InvalidState: return "invalid-state";
        case ErrorKind::DimensionMismatch: return "dimension-mismatch";
        case ErrorKind::EmptyPath: return "empty-path";
        case ErrorKind::NonConvergence: return "non-convergence";
        case ErrorKind::NumericFailure: return "numeric-failure";
        case ErrorKind::Instability: return "instability";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::ConfigParse: return "config-parse";
        case ErrorKind::IncompatibleCommand: return "incompatible-command";
        case ErrorKind::Io: return "io-failure";
    }
    return "unknown";
}

}  // namespace pomc
