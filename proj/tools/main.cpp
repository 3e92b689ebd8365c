#include "credopt/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"credopt: utility maximization and indifference pricing with default risk"};
    app.set_version_flag("--version", credopt::kToolVersion);
    app.require_subcommand(1, 1);

    credopt::RunRequest req;
    std::string out;
    std::uint64_t seed = 0;
    int paths = 0, steps = 0;

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "simulate paths, defaults and (with a regime) the filter"},
        {"log", "log-utility optimal strategy and value"},
        {"power", "k-bounded power-utility BSDE for each k"},
        {"exp", "k-bounded exponential-utility BSDE for each k"},
        {"price", "buying indifference price of the configured claim"},
        {"info-price", "partial- vs full-information prices and their difference"},
    };
    std::vector<CLI::App*> subs;
    std::vector<CLI::Option*> flags[4];
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", req.config_path, "JSON configuration or a previous manifest.json")->required();
        flags[0].push_back(sub->add_option("--out", out, "output directory (overrides outputs.directory)"));
        flags[1].push_back(sub->add_option("--seed", seed, "RNG seed (overrides numerics.seed)"));
        flags[2].push_back(sub->add_option("--paths", paths, "number of paths (overrides numerics.paths)"));
        flags[3].push_back(sub->add_option("--steps", steps, "time steps (overrides numerics.steps)"));
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : credopt::exit_invalid;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        req.subcommand = subs[i]->get_name();
        if (flags[0][i]->count()) req.out_dir = out;
        if (flags[1][i]->count()) req.seed = seed;
        if (flags[2][i]->count()) req.paths = paths;
        if (flags[3][i]->count()) req.steps = steps;
    }
    return credopt::run_experiment(req, std::cout, std::cerr);
}
