#pragma once

#include "credopt/pricing.hpp"

#include <optional>
#include <string>

namespace credopt {

struct NumericsConfig {
    int paths = 10000;
    int steps = 50;
    std::uint64_t seed = 42;
    int basis_degree = 2;
    double ridge = 1e-8;
    int batches = 8;
    int export_paths = 10;  // paths written to paths.csv by `simulate`
};

enum class UtilityKind { log, power, exponential };

struct UtilityConfig {
    UtilityKind kind = UtilityKind::power;
    double gamma = 0.5;
    double x0 = 1.0;
    Information information = Information::full;
    std::optional<ClaimSpec> claim;
    /// Optional fixed proportional strategy (one entry per asset), used by
    /// `simulate` for the wealth column and by `power` for the linear BSDE.
    std::optional<Vec> strategy;
};

struct OutputConfig {
    std::string directory = "out";
    bool csv = true;
    bool json = true;
};

struct ExperimentConfig {
    ModelSpec model;
    NumericsConfig numerics;
    UtilityConfig utility;
    std::vector<double> ks{1.0};
    OutputConfig outputs;
};

/// Configuration problem located in the source document.
class ConfigError : public ValidationError {
public:
    ConfigError(const std::string& source, int line, const std::string& field, const std::string& what)
        : ValidationError(field, locate(source, line) + (field.empty() ? what : field + ": " + what), Verbatim{}),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    static std::string locate(const std::string& source, int line) {
        return source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": ";
    }
    int line_;
};

/// Parses and validates a configuration document. A manifest written by a
/// previous run is accepted too: its "config" member is used. Unknown keys,
/// wrong types and out-of-range values raise ConfigError with the line of the
/// offending key.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON of the effective configuration (every default filled in).
/// Parsing it yields the same configuration.
std::string config_json(const ExperimentConfig& cfg, int indent = -1);

}  // namespace credopt
