// One line per acceptance criterion: "ACn PASS|FAIL  detail".
#include "credopt/drivers.hpp"
#include "credopt/log_strategy.hpp"
#include "credopt/pricing.hpp"

#include "oracle_testkit/oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace credopt;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
    std::printf("%s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const ModelSpec& benchmark() {
    static const ModelSpec spec = constant_model(0.05, 0.2, -0.5, 0.1, 1.0);
    return spec;
}

ModelSpec two_regime() {
    ModelSpec s = constant_model(0.0, 0.2, -0.4, 0.0, 1.0);
    HiddenRegimeSpec h;
    h.q_matrix = Mat(2, 2);
    h.q_matrix << -1.0, 1.0, 1.0, -1.0;
    h.mu_by_regime = {Vec::Constant(1, 0.15), Vec::Constant(1, -0.05)};
    h.lambda_by_regime = {Vec::Constant(1, 0.05), Vec::Constant(1, 0.6)};
    h.initial_dist = Vec::Constant(2, 0.5);
    s.regime_model = h;
    return s;
}

struct Draw {
    double mu, sigma, beta, lambda;
};

std::vector<Draw> draws(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mu(-0.2, 0.3), sigma(0.1, 0.6), mag(0.05, 0.95), lambda(0.0, 2.0);
    std::bernoulli_distribution negative(0.5);
    std::vector<Draw> out;
    for (int i = 0; i < 1000; ++i) {
        const double b = mag(rng);
        out.push_back({mu(rng), sigma(rng), negative(rng) ? -b : 2.0 * b, lambda(rng)});
    }
    return out;
}

void ac1() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(11);
    double worst = 0.0;
    long probe_violations = 0;
    for (const Draw& d : draws(1)) {
        auto f = [&](double x) { return log_objective(x, d.mu, d.sigma, d.beta, d.lambda); };
        double lo = -50.0, hi = 50.0;
        if (d.beta > 0) lo = -1.0 / d.beta + 1e-9;
        if (d.beta < 0) hi = -1.0 / d.beta - 1e-9;
        const double pi = log_optimal_strategy(d.mu, d.sigma, d.beta, d.lambda, true);
        const auto g = oracle::grid_argopt(f, lo, hi);
        worst = std::max(worst, std::abs(pi - g.arg));
        const double fp = f(pi);
        std::uniform_real_distribution<double> probe(lo, hi);
        for (int k = 0; k < 1000; ++k) probe_violations += fp < f(probe(rng));
    }
    const double secs = seconds_since(t0);
    report("AC1", worst <= 1e-5 && probe_violations == 0 && secs < 10.0,
           fmt("max |pi_hat - grid argmax| = %.2e (tol 1e-5), probe violations = %ld of 1e6, %.1f s (limit 10 s)",
               worst, probe_violations, secs));
}

void ac2() {
    double worst = 0.0;
    long sign_violations = 0;
    for (const Draw& d : draws(2)) {
        const double merton = d.mu / (d.sigma * d.sigma);
        worst = std::max(worst, std::abs(log_optimal_strategy(d.mu, d.sigma, 0.0, d.lambda, true) - merton));
        worst = std::max(worst, std::abs(log_optimal_strategy(d.mu, d.sigma, d.beta, 0.0, true) - merton));
        const double eps = merton - log_optimal_strategy(d.mu, d.sigma, d.beta, d.lambda, true);
        if ((d.beta < 0 && eps < 0) || (d.beta > 0 && eps > 0)) ++sign_violations;
    }
    report("AC2", worst <= 1e-10 && sign_violations == 0,
           fmt("max |pi_hat - mu/sigma^2| over beta=0 and lambda=0 = %.2e (tol 1e-10), sign-rule violations = %ld "
               "of 1000",
               worst, sign_violations));
}

void ac3() {
    const auto t0 = std::chrono::steady_clock::now();
    const PathBundle p = simulate_paths(benchmark(), 50, 100000, 303);
    double worst = 0.0;
    std::string detail;
    for (double pi : {0.0, 0.5, 1.0}) {
        const BsdeSolution sol = solve_linear_bsde_for_strategy(constant_strategy(small_vec({pi})), benchmark(), p, 0.5);
        const double expect = oracle::power_constant_oracle(pi, 0.05, 0.2, -0.5, 0.1, 0.5, 1.0);
        const double rel = std::abs(sol.Y0 - expect) / expect;
        worst = std::max(worst, rel);
        detail += fmt("pi=%.1f Y0=%.6f oracle=%.6f rel=%.1e; ", pi, sol.Y0, expect, rel);
    }
    const double secs = seconds_since(t0);
    report("AC3", worst <= 0.01 && secs < 60.0, detail + fmt("%.1f s (limit 60 s)", secs));
}

void ac4() {
    const PathBundle p = simulate_paths(benchmark(), 50, 100000, 404);
    const BsdeProblem problem(benchmark(), p, Information::full);
    std::vector<KPoint> pts;
    std::string detail;
    for (double k : {0.5, 1.0, 2.0, 4.0}) {
        const BsdeSolution sol = solve_bsde(power_generator(benchmark(), 0.5, StrategyBound{k}), problem);
        pts.push_back({k, sol.Y0, sol.Y0_se});
        detail += fmt("Y0(k=%g)=%.6f+-%.1e; ", k, sol.Y0, sol.Y0_se);
    }
    const auto best = oracle::grid_argopt(
        [](double pi) { return oracle::power_constant_oracle(pi, 0.05, 0.2, -0.5, 0.1, 0.5, 1.0); }, -2.0, 2.0);
    const double rel = std::abs(pts[2].value - best.value) / best.value;
    const KLimitReport lim = k_limit(pts);
    report("AC4", rel <= 0.02 && lim.monotone,
           detail + fmt("oracle max over constant pi = %.6f at pi=%.4f, k=2 rel diff %.1e (tol 2e-2), monotone within "
                        "2 SE: %s",
                        best.value, best.arg, rel, lim.monotone ? "yes" : "no"));
}

void ac5() {
    const double gamma = 0.5, k = 2.0;
    const PathBundle train = simulate_paths(benchmark(), 40, 60000, 505);
    const PathBundle fresh = simulate_paths(benchmark(), 40, 60000, 506);
    const GeneratorSpec gen = power_generator(benchmark(), gamma, StrategyBound{k});
    const BsdeSolution sol = solve_bsde(gen, BsdeProblem(benchmark(), train, Information::full));
    std::vector<double> argopt;
    const std::vector<double> Y = evaluate_bsde(sol, gen, BsdeProblem(benchmark(), fresh, Information::full), &argopt);
    const int m = fresh.steps(), pts = m + 1;
    const std::vector<int> checkpoints{0, m / 4, m / 2, 3 * m / 4, m};

    // E[X_t^gamma Y_t] at the checkpoints with paired standard errors of successive differences
    auto profile = [&](const StrategyFn& pi, bool& decreasing, bool& constant, std::string& out) {
        const WealthPath w = wealth_path(benchmark(), fresh, pi, StrategyKind::proportional, 1.0);
        std::vector<std::vector<double>> v(checkpoints.size(), std::vector<double>(fresh.n_paths));
        for (std::size_t c = 0; c < checkpoints.size(); ++c) {
            for (int i = 0; i < fresh.n_paths; ++i) {
                v[c][i] = std::pow(w.X(i, checkpoints[c]), gamma) * Y[i * pts + checkpoints[c]];
            }
        }
        decreasing = constant = true;
        for (std::size_t c = 0; c < checkpoints.size(); ++c) {
            out += fmt("%.5f ", estimate_mean(v[c]).mean);
            if (c == 0) continue;
            std::vector<double> step(fresh.n_paths), drift(fresh.n_paths);
            for (int i = 0; i < fresh.n_paths; ++i) {
                step[i] = v[c][i] - v[c - 1][i];
                drift[i] = v[c][i] - v[0][i];
            }
            const MeanEstimate s = estimate_mean(step), d = estimate_mean(drift);
            if (s.mean > 3.0 * s.se) decreasing = false;
            if (std::abs(d.mean) > 3.0 * d.se) constant = false;
        }
    };

    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> a(-1.5, 1.5), b(-2.0, 2.0), c(-1.0, 1.0);
    bool all_super = true;
    std::string detail;
    for (int n = 0; n < 5; ++n) {
        const double a0 = a(rng), a1 = b(rng), a2 = c(rng);
        // bounded feedback strategy in A^k with 1 + pi beta >= 0
        const StrategyFn pi = [=](const StrategyContext& ctx) {
            const double x = a0 + a1 * std::log(ctx.prices[0]) + a2 * ctx.t;
            return small_vec({std::clamp(x, -k, 1.95)});
        };
        bool dec = true, con = true;
        std::string line;
        profile(pi, dec, con, line);
        all_super = all_super && dec;
        detail += fmt("pi%d[", n) + line + (dec ? "] " : "]! ");
    }
    const StrategyFn best = [&](const StrategyContext& ctx) {
        return small_vec({argopt[ctx.path * m + ctx.step]});
    };
    bool dec = true, con = true;
    std::string line;
    profile(best, dec, con, line);
    detail += "argmax[" + line + "]";
    report("AC5", all_super && con,
           detail + fmt(" random strategies nonincreasing within 3 SE: %s, argmax constant within 3 SE: %s",
                        all_super ? "yes" : "no", con ? "yes" : "no"));
}

void ac6() {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelSpec spec = two_regime();
    const PathBundle p = simulate_paths(spec, 50, 100000, 606);
    const FilterOutput f = filter_paths(spec, p);
    const int m = p.steps();
    double simplex_err = 0.0;
    bool in_range = true;
    for (int i = 0; i < p.n_paths; ++i) {
        for (int t = 0; t <= m; ++t) {
            const auto pi = f.pi(i, t);
            simplex_err = std::max(simplex_err, std::abs(pi[0] + pi[1] - 1.0));
            in_range = in_range && pi[0] >= 0.0 && pi[0] <= 1.0 && pi[1] >= 0.0 && pi[1] <= 1.0;
        }
    }
    std::vector<double> wT(p.n_paths), mT(p.n_paths), LT(p.n_paths);
    for (int i = 0; i < p.n_paths; ++i) {
        wT[i] = f.W_bar(i, m)[0];
        mT[i] = f.M_bar(i, m)[0];
        LT[i] = f.L(i, m);
    }
    const MeanEstimate w = estimate_mean(wT), mb = estimate_mean(mT), L = estimate_mean(LT);

    const auto& h = *spec.regime_model;
    oracle::PfModel pf;
    pf.q = {{h.q_matrix(0, 0), h.q_matrix(0, 1)}, {h.q_matrix(1, 0), h.q_matrix(1, 1)}};
    pf.mu = {h.mu_by_regime[0](0), h.mu_by_regime[1](0)};
    pf.lambda = {h.lambda_by_regime[0](0), h.lambda_by_regime[1](0)};
    pf.initial = {h.initial_dist(0), h.initial_dist(1)};
    pf.sigma = 0.2;
    pf.beta = -0.4;
    double err = 0.0, self = 0.0;
    int count = 0;
    for (int i = 0; i < 8; ++i) {
        std::vector<double> logs(m + 1);
        std::vector<int> n(m + 1);
        for (int t = 0; t <= m; ++t) {
            logs[t] = std::log(p.S(i, t)[0]);
            n[t] = p.N(i, t)[0];
        }
        const auto a = oracle::particle_filter_mu(pf, logs, n, p.grid.dt(), 10000, 1000 + i);
        const auto b = oracle::particle_filter_mu(pf, logs, n, p.grid.dt(), 10000, 5000 + i);
        for (int t = 0; t <= m; ++t) {
            err += std::pow(f.mu(i, t)[0] - a[t], 2);
            self += std::pow(a[t] - b[t], 2);
            ++count;
        }
    }
    const double rmse = std::sqrt(err / count), noise = std::sqrt(self / count / 2.0);
    const double secs = seconds_since(t0);
    const bool pass = in_range && simplex_err <= 1e-12 && std::abs(w.mean) <= 3.0 * w.se &&
                      std::abs(mb.mean) <= 3.0 * mb.se && rmse <= 2.0 * noise && std::abs(L.mean - 1.0) <= 3.0 * L.se &&
                      secs < 120.0;
    report("AC6", pass,
           fmt("simplex max err %.1e, E[W_bar_T]=%.2e (3SE %.1e), E[M_bar_T]=%.2e (3SE %.1e), PF RMSE %.2e vs "
               "self-noise %.2e (ratio %.2f, limit 2), E[L_T]=%.5f (3SE %.1e), %.1f s (limit 120 s)",
               simplex_err, w.mean, 3.0 * w.se, mb.mean, 3.0 * mb.se, rmse, noise, rmse / noise, L.mean, 3.0 * L.se,
               secs));
}

void ac7() {
    const ModelSpec spec = two_regime();
    const PathBundle p = simulate_paths(spec, 25, 20000, 707);
    const FilterOutput f = filter_paths(spec, p);
    const std::vector<double> ks{1.0};
    PricingOptions opts;
    ClaimSpec zero;
    const double p0 = hodges_price(zero, Information::partial, ks, spec, p, &f, opts).limit;
    std::string detail = fmt("p_bar(0)=%g; ", p0);
    bool pass = p0 == 0.0;
    for (double c : {0.5, 1.0}) {
        ClaimSpec cash;
        cash.kind = ClaimKind::constant;
        cash.amount = c;
        const double pc = hodges_price(cash, Information::partial, ks, spec, p, &f, opts).limit;
        pass = pass && std::abs(pc - c) <= 2e-2;
        detail += fmt("p_bar(%g)=%.6f; ", c, pc);
    }
    ClaimSpec bond;
    bond.kind = ClaimKind::defaultable_bond;
    double previous = 0.0;
    for (double lambda : {0.1, 1e-3, 0.0}) {
        const ModelSpec s = constant_model(0.05, 0.2, -0.5, lambda, 1.0);
        const PathBundle q = simulate_paths(s, 25, 20000, 708);
        const FilterOutput g = filter_paths(s, q);
        const double pb = hodges_price(bond, Information::partial, {1.0, 2.0}, s, q, &g, opts).limit;
        pass = pass && pb > 0.0 && pb < 1.0 + (lambda == 0.0 ? 1e-2 : 0.0);
        if (lambda < 0.1) pass = pass && std::abs(pb - 1.0) <= 1e-2 && pb > previous;
        previous = pb;
        detail += fmt("bond(lambda=%g)=%.6f; ", lambda, pb);
    }
    report("AC7", pass, detail + "tolerances: exact zero, cash 2e-2, bond in (0,1) and 1 +- 1e-2 as lambda -> 0");
}

void ac8() {
    ClaimSpec bond;
    bond.kind = ClaimKind::defaultable_bond;
    const std::vector<double> ks{1.0, 2.0};
    const PricingOptions opts;
    bool pass = true;
    std::string detail;
    double identity_err = 0.0;
    auto identities = [&](const PriceReport& r) {
        for (const auto& row : r.rows) {
            identity_err = std::max(identity_err, std::abs(row.d - (row.p_bar - row.p)));
            identity_err =
                std::max(identity_err, std::abs(row.p_bar - std::log(row.J_bar_zero / row.J_bar_claim) / r.gamma));
            identity_err = std::max(identity_err, std::abs(row.p - std::log(row.J_zero / row.J_claim) / r.gamma));
        }
    };

    const PathBundle single = simulate_paths(benchmark(), 25, 20000, 801);
    const PriceReport r1 = information_price(bond, ks, benchmark(), single, filter_paths(benchmark(), single), opts);
    identities(r1);
    for (const auto& row : r1.rows) {
        pass = pass && std::abs(row.d) <= 2.0 * row.d_se;
        detail += fmt("single-regime d(k=%g)=%.2e (2SE %.1e); ", row.k, row.d, 2.0 * row.d_se);
    }

    const ModelSpec spec = two_regime();
    const PathBundle a = simulate_paths(spec, 25, 20000, 802);
    const PathBundle b = simulate_paths(spec, 25, 20000, 803);
    const PriceReport ra = information_price(bond, ks, spec, a, filter_paths(spec, a), opts);
    const PriceReport rb = information_price(bond, ks, spec, b, filter_paths(spec, b), opts);
    identities(ra);
    identities(rb);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double tol = 3.0 * std::hypot(ra.rows[i].d_se, rb.rows[i].d_se);
        pass = pass && std::abs(ra.rows[i].d - rb.rows[i].d) <= tol;
        detail += fmt("two-regime d(k=%g)=%.5f / %.5f over two seeds (3SE %.1e); ", ks[i], ra.rows[i].d,
                      rb.rows[i].d, tol);
    }
    pass = pass && identity_err == 0.0;
    report("AC8", pass, detail + fmt("identity max err %.1e", identity_err));
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void ac9() {
    const fs::path root = fs::temp_directory_path() / "credopt_acceptance_ac9";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cli = CREDOPT_CLI;
    const std::string configs = CREDOPT_SOURCE_DIR "/configs/";
    bool pass = true;
    std::string detail;
    const std::pair<const char*, const char*> runs[] = {
        {"power", "power_benchmark.json"}, {"info-price", "info_price_two_regime.json"}, {"simulate", "simulate.json"}};
    for (const auto& [sub, cfg] : runs) {
        const fs::path first = root / (std::string(sub) + "_a"), second = root / (std::string(sub) + "_b");
        const std::string run1 = cli + " " + sub + " --config " + configs + cfg + " --out " + first.string() +
                                 " --paths 2000 --steps 20 > /dev/null";
        const std::string run2 = cli + " " + sub + " --config " + (first / "manifest.json").string() + " --out " +
                                 second.string() + " > /dev/null";
        if (std::system(run1.c_str()) != 0 || std::system(run2.c_str()) != 0) {
            pass = false;
            detail += std::string(sub) + ": run failed; ";
            continue;
        }
        int files = 0, same = 0;
        for (const auto& e : fs::directory_iterator(first)) {
            ++files;
            same += fs::exists(second / e.path().filename()) && slurp(e.path()) == slurp(second / e.path().filename());
        }
        pass = pass && files > 1 && files == same;
        detail += fmt("%s: %d/%d files identical; ", sub, same, files);
    }
    report("AC9", pass, detail);
}

}  // namespace

int main() {
    const std::pair<const char*, void (*)()> criteria[] = {{"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3},
                                                           {"AC4", ac4}, {"AC5", ac5}, {"AC6", ac6},
                                                           {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}};
    for (const auto& [id, run] : criteria) {
        try {
            run();
        } catch (const std::exception& e) {
            report(id, false, std::string("exception: ") + e.what());
        }
    }
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
