#pragma once

#include "credopt/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace credopt {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { exit_ok = 0, exit_invalid = 2, exit_numerical = 3, exit_io = 4 };

struct RunRequest {
    std::string subcommand;  // simulate | log | power | exp | price | info-price
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
    std::optional<int> steps;
};

/// Loads the configuration, applies command-line overrides, runs the
/// subcommand's pipeline and writes its artifacts plus manifest.json into the
/// output directory. Human-readable progress goes to `log`, errors to `err`.
/// A numerical failure also writes diagnostics.json.
int run_experiment(const RunRequest& request, std::ostream& log, std::ostream& err);

}  // namespace credopt
