#include "credopt/cli.hpp"

#include "credopt/io.hpp"
#include "credopt/log_strategy.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace credopt {
namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Artifact {
    std::string name;
    std::string bytes;
};

class Run {
public:
    Run(ExperimentConfig cfg, std::string subcommand, std::ostream& log)
        : cfg_(std::move(cfg)), sub_(std::move(subcommand)), log_(log) {}

    std::vector<Artifact> execute();

private:
    const PathBundle& paths();
    const FilterOutput& filter();
    const FilterOutput* filter_for(Information info) { return info == Information::partial ? &filter() : nullptr; }
    BasisSpec basis() const { return {cfg_.numerics.basis_degree, cfg_.numerics.ridge}; }
    PricingOptions pricing() const { return {cfg_.utility.gamma, basis(), cfg_.numerics.batches}; }

    void csv(const std::string& name, const std::function<void(std::ostream&)>& write) {
        if (!cfg_.outputs.csv) return;
        std::ostringstream s;
        write(s);
        out_.push_back({name, s.str()});
    }
    void json(const std::string& name, const ojson& doc) {
        if (!cfg_.outputs.json) return;
        out_.push_back({name, doc.dump(2) + "\n"});
    }

    void simulate();
    void log_utility();
    void power();
    void exponential();
    void price();
    void info_price();

    ExperimentConfig cfg_;
    std::string sub_;
    std::ostream& log_;
    std::optional<PathBundle> paths_;
    std::optional<FilterOutput> filter_;
    std::vector<Artifact> out_;
};

const char* info_name(Information info) { return info == Information::full ? "full" : "partial"; }

ojson limit_json(const KLimitReport& r) {
    return ojson{{"limit", r.limit},
                 {"increments", r.increments},
                 {"monotone_within_2se", r.monotone},
                 {"violations", r.violations},
                 {"increments_shrinking", r.shrinking}};
}

ojson diagnostics_json(const BsdeSolution& sol) {
    double min_r2 = 1.0, max_cond = 0.0, max_residual = 0.0;
    int min_degree = 2;
    for (const auto& d : sol.diagnostics) {
        min_r2 = std::min(min_r2, d.r2);
        max_cond = std::max(max_cond, d.condition);
        max_residual = std::max(max_residual, d.residual);
        min_degree = std::min(min_degree, d.degree);
    }
    return ojson{{"min_r2", min_r2}, {"max_condition", max_cond}, {"max_residual", max_residual},
                 {"min_degree", min_degree}};
}

const PathBundle& Run::paths() {
    if (!paths_) {
        const auto& n = cfg_.numerics;
        log_ << "simulating " << n.paths << " paths x " << n.steps << " steps (seed " << n.seed << ")\n";
        paths_ = simulate_paths(cfg_.model, n.steps, n.paths, n.seed);
    }
    return *paths_;
}

const FilterOutput& Run::filter() {
    if (!filter_) filter_ = filter_paths(cfg_.model, paths());
    return *filter_;
}

void Run::simulate() {
    const PathBundle& p = paths();
    const auto& u = cfg_.utility;
    std::optional<WealthPath> wealth;
    if (u.strategy) {
        SmallVec pi(u.strategy->size());
        for (Eigen::Index i = 0; i < u.strategy->size(); ++i) pi[i] = (*u.strategy)(i);
        wealth = wealth_path(cfg_.model, p, constant_strategy(pi), StrategyKind::proportional, u.x0);
    }
    csv("paths.csv", [&](std::ostream& s) { write_paths_csv(s, p, wealth ? &*wealth : nullptr, cfg_.numerics.export_paths); });
    if (p.has_regime) csv("filter.csv", [&](std::ostream& s) { write_filter_csv(s, filter(), cfg_.numerics.export_paths); });

    const int T = p.steps();
    ojson defaults = ojson::array();
    for (int j = 0; j < p.n_defaults; ++j) {
        std::vector<double> n(p.n_paths), m(p.n_paths);
        for (int i = 0; i < p.n_paths; ++i) {
            n[i] = p.N(i, T)[j];
            m[i] = p.M(i, T)[j];
        }
        const MeanEstimate fn = estimate_mean(n), fm = estimate_mean(m);
        defaults.push_back(ojson{{"default_fraction", fn.mean}, {"default_fraction_se", fn.se},
                                 {"M_T_mean", fm.mean}, {"M_T_se", fm.se}});
    }
    ojson assets = ojson::array();
    for (int a = 0; a < p.n_assets; ++a) {
        std::vector<double> s(p.n_paths);
        for (int i = 0; i < p.n_paths; ++i) s[i] = p.S(i, T)[a];
        const MeanEstimate e = estimate_mean(s);
        assets.push_back(ojson{{"S_T_mean", e.mean}, {"S_T_se", e.se}});
    }
    ojson doc{{"paths", p.n_paths}, {"steps", T}, {"seed", p.seed}, {"horizon", p.grid.horizon},
              {"assets", assets}, {"defaults", defaults}, {"same_cell_defaults", p.same_cell_defaults}};
    if (wealth) {
        std::vector<double> x(p.n_paths);
        for (int i = 0; i < p.n_paths; ++i) x[i] = wealth->X(i, T);
        const MeanEstimate e = estimate_mean(x);
        doc["X_T_mean"] = e.mean;
        doc["X_T_se"] = e.se;
    }
    json("summary.json", doc);
    log_ << "simulate: wrote summary for " << p.n_paths << " paths\n";
}

void Run::log_utility() {
    const auto& u = cfg_.utility;
    const bool partial = u.information == Information::partial;
    const LogSolution sol = log_value(cfg_.model, paths(), u.x0,
                                      partial ? CoefficientSource::filtered : CoefficientSource::exact,
                                      partial ? &filter() : nullptr);
    csv("log.csv", [&](std::ostream& s) { write_log_csv(s, sol, paths().grid); });
    std::vector<double> pi0(sol.n_paths);
    for (int i = 0; i < sol.n_paths; ++i) pi0[i] = sol.pi(i, 0);
    const MeanEstimate p0 = estimate_mean(pi0);
    json("log.json", ojson{{"information", info_name(u.information)},
                           {"x0", u.x0},
                           {"V", sol.value.mean},
                           {"V_se", sol.value.se},
                           {"pi_hat_0_mean", p0.mean},
                           {"paths", sol.n_paths},
                           {"steps", sol.n_steps}});
    log_ << "log: V = " << format_double(sol.value.mean) << " (se " << format_double(sol.value.se) << ")\n";
}

void Run::power() {
    const auto& u = cfg_.utility;
    const BsdeProblem problem(cfg_.model, paths(), u.information, filter_for(u.information));
    std::vector<KPoint> points;
    ojson rows = ojson::array();
    std::optional<BsdeSolution> last;
    for (double k : cfg_.ks) {
        const StrategyBound bound{k};
        const GeneratorSpec gen = power_generator(cfg_.model, u.gamma, bound);
        BsdeSolution sol = solve_bsde(gen, problem, basis());
        points.push_back({k, sol.Y0, sol.Y0_se});
        const double value = std::pow(u.x0, u.gamma) * sol.Y0 / u.gamma;
        rows.push_back(ojson{{"k", k},
                             {"Y0", sol.Y0},
                             {"se", sol.Y0_se},
                             {"bound", *gen.upper_bound},
                             {"value", value},
                             {"diagnostics", diagnostics_json(sol)}});
        log_ << "power: k = " << format_double(k) << "  Y0 = " << format_double(sol.Y0) << " (se "
             << format_double(sol.Y0_se) << ")\n";
        last = std::move(sol);
    }
    csv("power.csv", [&](std::ostream& s) {
        CsvWriter w(s);
        w.header({"k", "Y0", "se", "bound", "min_r2", "max_condition"});
        for (const auto& r : rows) {
            w << r["k"].get<double>() << r["Y0"].get<double>() << r["se"].get<double>() << r["bound"].get<double>()
              << r["diagnostics"]["min_r2"].get<double>() << r["diagnostics"]["max_condition"].get<double>();
            w.end_row();
        }
    });
    csv("bsde.csv", [&](std::ostream& s) { write_bsde_csv(s, *last, paths().grid); });
    ojson doc{{"gamma", u.gamma}, {"information", info_name(u.information)}, {"x0", u.x0}, {"rows", rows}};
    if (points.size() >= 3) {
        doc["k_limit"] = limit_json(k_limit(points));
    } else {
        doc["k_limit"] = ojson{{"limit", points.back().value}, {"note", "fewer than three k values"}};
    }
    if (u.strategy) {
        SmallVec pi(u.strategy->size());
        for (Eigen::Index i = 0; i < u.strategy->size(); ++i) pi[i] = (*u.strategy)(i);
        const BsdeSolution lin = solve_linear_bsde_for_strategy(constant_strategy(pi), cfg_.model, paths(), u.gamma, basis());
        doc["strategy"] = ojson{{"pi", std::vector<double>(u.strategy->data(), u.strategy->data() + u.strategy->size())},
                                {"Y0", lin.Y0},
                                {"se", lin.Y0_se}};
    }
    json("power.json", doc);
}

void Run::exponential() {
    const auto& u = cfg_.utility;
    const ClaimSpec* claim = u.claim ? &*u.claim : nullptr;
    std::vector<KPoint> points;
    ojson rows = ojson::array();
    for (double k : cfg_.ks) {
        const ExpValue v = exp_value(claim, u.information, StrategyBound{k}, cfg_.model, paths(),
                                     filter_for(u.information), pricing());
        points.push_back({k, v.J, v.se});
        rows.push_back(ojson{{"k", k}, {"J", v.J}, {"se", v.se}, {"value", -std::exp(-u.gamma * u.x0) * v.J},
                             {"batch_values", v.batch_values}});
        log_ << "exp: k = " << format_double(k) << "  J = " << format_double(v.J) << " (se " << format_double(v.se)
             << ")\n";
    }
    csv("exp.csv", [&](std::ostream& s) {
        CsvWriter w(s);
        w.header({"k", "J", "se", "value"});
        for (const auto& r : rows) {
            w << r["k"].get<double>() << r["J"].get<double>() << r["se"].get<double>() << r["value"].get<double>();
            w.end_row();
        }
    });
    ojson doc{{"gamma", u.gamma}, {"information", info_name(u.information)}, {"x0", u.x0},
              {"claim", claim ? claim->name() : "none"}, {"rows", rows}};
    if (points.size() >= 3) doc["k_limit"] = limit_json(k_limit(points, false));
    json("exp.json", doc);
}

void Run::price() {
    const auto& u = cfg_.utility;
    const ClaimSpec claim = u.claim.value_or(ClaimSpec{});
    const HodgesResult h =
        hodges_price(claim, u.information, cfg_.ks, cfg_.model, paths(), filter_for(u.information), pricing());
    const PriceReport r = price_report(claim, h, paths(), pricing());
    json("price.json", nlohmann::ordered_json::parse(price_report_json(r)));
    csv("price.csv", [&](std::ostream& s) { write_price_csv(s, r); });
    for (const auto& row : h.rows) {
        log_ << "price: k = " << format_double(row.k) << "  p = " << format_double(row.price) << " (se "
             << format_double(row.se) << ")\n";
    }
}

void Run::info_price() {
    const auto& u = cfg_.utility;
    const ClaimSpec claim = u.claim.value_or(ClaimSpec{});
    const PriceReport r = information_price(claim, cfg_.ks, cfg_.model, paths(), filter(), pricing());
    json("price.json", nlohmann::ordered_json::parse(price_report_json(r)));
    csv("price.csv", [&](std::ostream& s) { write_price_csv(s, r); });
    for (const auto& row : r.rows) {
        log_ << "info-price: k = " << format_double(row.k) << "  d = " << format_double(row.d) << " (se "
             << format_double(row.d_se) << ")\n";
    }
}

std::vector<Artifact> Run::execute() {
    if (sub_ == "simulate") {
        simulate();
    } else if (sub_ == "log") {
        log_utility();
    } else if (sub_ == "power") {
        power();
    } else if (sub_ == "exp") {
        exponential();
    } else if (sub_ == "price") {
        price();
    } else if (sub_ == "info-price") {
        info_price();
    }
    return std::move(out_);
}

// Subcommand-specific checks, run before any computation.
void check_for_subcommand(const ExperimentConfig& cfg, const std::string& sub, const std::string& source) {
    const auto& u = cfg.utility;
    auto fail = [&](const std::string& field, const std::string& what) {
        throw ConfigError(source, 0, field, what);
    };
    static const std::vector<std::string> known{"simulate", "log", "power", "exp", "price", "info-price"};
    if (std::find(known.begin(), known.end(), sub) == known.end()) fail("subcommand", "unknown subcommand " + sub);
    if (sub == "log") {
        if (u.kind != UtilityKind::log) fail("utility.kind", "the log subcommand needs kind \"log\"");
        if (cfg.model.n_assets != 1 || cfg.model.n_defaults != 1) {
            fail("model.n_assets", "the log subcommand handles one asset and one default");
        }
    }
    if (sub == "power" && u.kind != UtilityKind::power) fail("utility.kind", "the power subcommand needs kind \"power\"");
    if ((sub == "exp" || sub == "price" || sub == "info-price") && u.kind != UtilityKind::exponential) {
        fail("utility.kind", "the " + sub + " subcommand needs kind \"exponential\"");
    }
    if ((sub == "price" || sub == "info-price") && !u.claim) fail("utility.claim", "pricing needs a claim");
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << bytes;
    if (!f) throw IoError("write failed for " + path.string());
}

fs::path prepare_directory(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
    return fs::path(dir);
}

ojson manifest_config(const ExperimentConfig& cfg) {
    // The directory does not influence results; leaving it out lets a rerun
    // into another directory reproduce the manifest byte for byte.
    ojson c = ojson::parse(config_json(cfg));
    c["outputs"].erase("directory");
    return c;
}

}  // namespace

int run_experiment(const RunRequest& request, std::ostream& log, std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(request.config_path);
        if (request.out_dir) cfg.outputs.directory = *request.out_dir;
        if (request.seed) cfg.numerics.seed = *request.seed;
        if (request.paths) {
            if (*request.paths < 1) throw ValidationError("--paths", "must be >= 1");
            cfg.numerics.paths = *request.paths;
        }
        if (request.steps) {
            if (*request.steps < 2) throw ValidationError("--steps", "must be >= 2");
            cfg.numerics.steps = *request.steps;
        }
        check_for_subcommand(cfg, request.subcommand, request.config_path);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return exit_invalid;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return exit_io;
    }

    try {
        const fs::path dir = prepare_directory(cfg.outputs.directory);
        std::vector<Artifact> artifacts;
        try {
            artifacts = Run(cfg, request.subcommand, log).execute();
        } catch (const NumericalError& e) {
            ojson diag{{"error", e.what()}, {"path", e.path()}, {"step", e.step()}, {"subcommand", request.subcommand}};
            write_file(dir / "diagnostics.json", diag.dump(2) + "\n");
            err << "numerical failure: " << e.what() << "\n";
            return exit_numerical;
        }
        const ojson config = manifest_config(cfg);
        ojson listed = ojson::array();
        for (const auto& a : artifacts) {
            write_file(dir / a.name, a.bytes);
            listed.push_back(ojson{{"name", a.name}, {"fnv1a", fnv1a_hex(a.bytes)}, {"bytes", a.bytes.size()}});
        }
        const std::string eigen = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                  "." + std::to_string(EIGEN_MINOR_VERSION);
        ojson manifest{{"tool", "credopt"},
                       {"version", kToolVersion},
                       {"versions", ojson{{"credopt", kToolVersion}, {"eigen", eigen},
                                          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                       {"subcommand", request.subcommand},
                       {"config_hash", fnv1a_hex(config.dump())},
                       {"seed", cfg.numerics.seed},
                       {"rng", "mt19937_64 per path, seeded from mix64(seed) and mix64(path)"},
                       {"config", config},
                       {"artifacts", listed}};
        write_file(dir / "manifest.json", manifest.dump(2) + "\n");
        log << "wrote " << artifacts.size() + 1 << " files to " << dir.string() << "\n";
        return exit_ok;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return exit_invalid;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return exit_io;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    }
}

}  // namespace credopt
