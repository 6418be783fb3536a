// pomclab: batch experiment runner.
//
//   pomclab <command> --config <path> [--seed N --out DIR --workers K]

#include "pomc/config.hpp"
#include "pomc/error.hpp"
#include "pomc/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <nlohmann/json.hpp>

namespace {

constexpr const char* kCommands[] = {"simulate",      "fit",         "kl-profile", "consistency",
                                     "filter-forget", "return-tail", "moment"};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pomclab: simulation, likelihood and consistency experiments for partially observed Markov models"};
    app.set_version_flag("--version", pomc::cli::library_version());

    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> workers;
    app.add_option("command", command, "simulate | fit | kl-profile | consistency | filter-forget | return-tail | moment")
        ->required()
        ->check(CLI::IsMember(std::vector<std::string>(std::begin(kCommands), std::end(kCommands))));
    app.add_option("--config", config_path, "experiment config (INI)")->required();
    app.add_option("--seed", seed, "master seed, overrides experiment.seed");
    app.add_option("--out", out, "output directory, overrides experiment.output_dir");
    app.add_option("--workers", workers, "worker threads (fallback: POMCLAB_WORKERS)")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << pomc::cli::error_record(pomc::ErrorKind::ConfigParse, e.what()) << '\n';
        return pomc::cli::exit_code(pomc::ErrorKind::ConfigParse);
    }

    try {
        pomc::cli::RunOptions options;
        options.command = pomc::cli::command_from_string(command);
        options.seed = seed;
        options.output_dir = out;
        options.workers = workers;
        if (const char* env = std::getenv("POMCLAB_WORKERS")) options.env_workers = env;
        const auto config = pomc::cli::resolve(pomc::cli::load_config(config_path), options);
        const auto report = pomc::cli::run(config);
        for (const auto& w : report.warnings) {
            std::cerr << nlohmann::json{{"warning", w}}.dump() << '\n';
        }
        return 0;
    } catch (const pomc::Error& e) {
        std::cerr << pomc::cli::error_record(e.kind(), e.what()) << '\n';
        return pomc::cli::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << pomc::cli::error_record(pomc::ErrorKind::NumericFailure, e.what()) << '\n';
        return pomc::cli::exit_code(pomc::ErrorKind::NumericFailure);
    }
}
