#pragma once

#include "pomc/estimate.hpp"
#include "pomc/hmm.hpp"
#include "pomc/model.hpp"
#include "pomc/odm.hpp"
#include "pomc/params.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pomc::cli {

enum class Command { Simulate, Fit, KlProfile, Consistency, FilterForget, ReturnTail, Moment };

std::string to_string(Command command);
Command command_from_string(const std::string& name);

/// One profile axis: `count` equally spaced values of coordinate `name` on [lo, hi].
struct AxisSpec {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 1;

    std::vector<double> values() const;
    friend bool operator==(const AxisSpec&, const AxisSpec&) = default;
};

/// A declarative experiment, read from an INI-style file with sections
/// [experiment], [theta_star], [box], [grid], [noise], [init], [fit],
/// [profile] and [ergodicity].
struct ExperimentConfig {
    std::optional<Command> command;
    std::string preset;
    Family family = Family::Nbin;
    std::size_t d = 1;
    odm::NbParametrization nb = odm::NbParametrization::Mean;
    std::optional<std::uint64_t> seed;
    std::size_t n = 1000;
    std::vector<std::size_t> n_list{100, 1000, 10000};
    std::size_t replicates = 1;
    std::size_t burn = 1000;
    std::size_t workers = 0;  ///< 0 leaves the choice to the command line or environment
    std::string output_dir = "out";
    std::string data;  ///< optional observation file (column y) for `fit`

    ParamPoint theta_star = ThetaNbin{};
    /// Box intervals by coordinate name; coordinates not listed stay fixed at theta_star.
    std::vector<std::pair<std::string, estimate::Interval>> box;

    hmm::GridSpec grid{};
    hmm::NoisePair noise{};
    hmm::InitialLaw xi = hmm::InitialLaw::dirac(0.0);
    hmm::InitialLaw xi_alt = hmm::InitialLaw::uniform(10.0);
    State x_init{};
    State x_alt{};

    estimate::FitConfig fit{};
    std::size_t truncation = 200;
    std::size_t batches = 30;
    std::vector<AxisSpec> axes;

    std::size_t excursions = 10000;
    std::int64_t cap = 1'000'000;
    double beta = 1.0;

    ModelSpec model() const;
    estimate::ThetaBox theta_box() const;
};

/// Builds a preset: hmm1-default, nbin-default or nm2-default.
ExperimentConfig preset(const std::string& name);

/// Parses INI text. Throws config-parse on syntax errors, unknown keys or bad values.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config(serialize(c)) reproduces c exactly.
std::string serialize(const ExperimentConfig& config);

/// FNV-1a 64-bit hash of the canonical form with the worker count and output
/// directory cleared, since results depend on neither. Rendered as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& lhs, const ExperimentConfig& rhs);

}  // namespace pomc::cli
