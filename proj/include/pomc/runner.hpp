#pragma once

#include "pomc/config.hpp"
#include "pomc/error.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pomc::cli {

/// Library version recorded in every manifest.
const char* library_version();

/// Command-line overrides layered on top of a config file.
struct RunOptions {
    std::optional<Command> command;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<std::size_t> workers;
    /// Value of POMCLAB_WORKERS, if set.
    std::optional<std::string> env_workers;
};

/// Applies overrides. The worker count is taken from the flag, then the
/// environment, then the config, then 1. Throws incompatible-command when the
/// config names a different command, config-parse when no seed is available.
ExperimentConfig resolve(ExperimentConfig config, const RunOptions& options);

struct RunReport {
    std::filesystem::path output_dir;
    std::vector<std::string> files;  ///< data files written, relative to output_dir
    std::vector<std::string> warnings;
};

/// Runs a resolved config and writes its tables plus manifest.json into the
/// output directory. Data files depend only on the config, never on the
/// worker count or the clock.
RunReport run(const ExperimentConfig& config);

/// 2 for configuration problems, 3 for numeric failures, 4 for I/O.
int exit_code(ErrorKind kind);

/// Single-line JSON error record for standard error.
std::string error_record(ErrorKind kind, const std::string& message);

}  // namespace pomc::cli
