#include "credopt/paths.hpp"

#include "credopt/io.hpp"

#include <algorithm>
#include <ostream>

namespace credopt {
namespace {

/// Exact continuous-time simulation of the regime chain, sampled at the grid points.
void simulate_regimes(const HiddenRegimeSpec& chain, const TimeGrid& grid, std::mt19937_64& rng,
                      std::span<int> out) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> unit_exp(1.0);
    const int r = chain.n_regimes();

    auto draw_categorical = [&](auto weight, double total) {
        double u = unif(rng) * total;
        int last = -1;
        for (int k = 0; k < r; ++k) {
            const double w = weight(k);
            if (w <= 0.0) continue;
            last = k;
            if (u < w) return k;
            u -= w;
        }
        return last;
    };

    int state = draw_categorical([&](int k) { return chain.initial_dist(k); }, 1.0);
    auto holding = [&](int s) {
        const double rate = -chain.q_matrix(s, s);
        return rate > 0.0 ? unit_exp(rng) / rate : kInf;
    };
    double next_switch = holding(state);
    out[0] = state;
    for (int i = 1; i < grid.points(); ++i) {
        const double t = grid.time(i);
        while (next_switch <= t) {
            const double rate = -chain.q_matrix(state, state);
            const int from = state;
            state = draw_categorical([&](int k) { return k == from ? 0.0 : chain.q_matrix(from, k); }, rate);
            next_switch += holding(state);
        }
        out[i] = state;
    }
}

}  // namespace

PathBundle simulate_paths(const ModelSpec& spec, int m_steps, int n_paths, std::uint64_t seed) {
    spec.validate();
    if (m_steps < 2) throw ValidationError("numerics.steps", "need at least 2 time steps");
    if (n_paths < 1) throw ValidationError("numerics.paths", "need at least 1 path");
    PathBundle b;
    b.n_paths = n_paths;
    b.n_assets = spec.n_assets;
    b.n_defaults = spec.n_defaults;
    b.grid = TimeGrid{spec.horizon, m_steps};
    b.seed = seed;
    b.has_regime = spec.regime_model.has_value();
    if (!(b.grid.dt() > 0.0)) throw ValidationError("numerics.steps", "time step must be positive");

    const int n = spec.n_assets;
    const int p = spec.n_defaults;
    const int pts = b.points();
    const double dt = b.grid.dt();
    const double sqdt = std::sqrt(dt);
    b.dw.resize(static_cast<std::size_t>(n_paths) * m_steps * n);
    b.prices.resize(static_cast<std::size_t>(n_paths) * pts * n);
    b.defaults.assign(static_cast<std::size_t>(n_paths) * pts * p, 0);
    b.compensated.assign(static_cast<std::size_t>(n_paths) * pts * p, 0.0);
    if (b.has_regime) b.regimes.resize(static_cast<std::size_t>(n_paths) * pts);

    std::vector<std::uint8_t> simultaneous(n_paths, 0);
    const bool check_vol = spec.volatility.kind != VolatilityKind::constant;

    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t path) {
        auto rng = stream_engine(seed, path);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::exponential_distribution<double> unit_exp(1.0);

        std::span<int> regime_path;
        if (b.has_regime) {
            regime_path = std::span<int>(b.regimes.data() + path * pts, pts);
            simulate_regimes(*spec.regime_model, b.grid, rng, regime_path);
        }
        SmallVec clock(p), hazard = SmallVec::Zero(p);
        for (int j = 0; j < p; ++j) clock(j) = unit_exp(rng);

        double* S = b.prices.data() + path * pts * n;
        std::uint8_t* N = b.defaults.data() + path * pts * p;
        double* M = b.compensated.data() + path * pts * p;
        double* dW = b.dw.data() + path * m_steps * n;
        std::copy(spec.s0.data(), spec.s0.data() + n, S);

        SmallVec dw(n), dn(p);
        for (int i = 0; i < m_steps; ++i) {
            const std::span<const double> s_now(S + i * n, n);
            const std::span<const std::uint8_t> n_now(N + i * p, p);
            const LocalCoefficients c = spec.coefficients(s_now, n_now, b.has_regime ? regime_path[i] : 0);
            if (check_vol && !is_uniformly_elliptic(c.sigma, spec.limits)) {
                throw NumericalError("volatility matrix is singular or violates the ellipticity bounds",
                                     static_cast<long>(path), i);
            }
            for (int k = 0; k < n; ++k) dw(k) = sqdt * normal(rng);
            std::copy(dw.data(), dw.data() + n, dW + i * n);

            int crossings = 0;
            for (int j = 0; j < p; ++j) {
                dn(j) = 0.0;
                double accrued = 0.0;
                if (!n_now[j]) {
                    const double before = hazard(j);
                    hazard(j) += c.lambda(j) * dt;
                    if (hazard(j) >= clock(j) && c.lambda(j) > 0.0) {
                        // compensator stops at the crossing time inside the cell
                        accrued = clock(j) - before;
                        dn(j) = 1.0;
                        ++crossings;
                    } else {
                        accrued = c.lambda(j) * dt;
                    }
                }
                N[(i + 1) * p + j] = static_cast<std::uint8_t>(n_now[j] + static_cast<int>(dn(j)));
                M[(i + 1) * p + j] = M[i * p + j] + dn(j) - accrued;
            }
            if (crossings > 1) simultaneous[path] = 1;

            // Jump factors commute, so the ordering of same-cell defaults does not change S.
            const SmallVec drift = (c.mu - 0.5 * (c.sigma * c.sigma.transpose()).diagonal()) * dt;
            const SmallVec diffusion = c.sigma * dw;
            for (int k = 0; k < n; ++k) {
                double jump = 1.0;
                for (int j = 0; j < p; ++j) {
                    if (dn(j) > 0.0) jump *= 1.0 + c.beta(k, j);
                }
                S[(i + 1) * n + k] = S[i * n + k] * std::exp(drift(k) + diffusion(k)) * jump;
            }
        }
    });
    b.same_cell_defaults = std::count(simultaneous.begin(), simultaneous.end(), 1);
    return b;
}

PathBundle coarsen(const PathBundle& fine, int factor) {
    if (factor < 1 || fine.steps() % factor != 0 || fine.steps() / factor < 2) {
        throw ValidationError("factor", "must divide the number of steps and leave at least 2 steps");
    }
    PathBundle c;
    c.n_paths = fine.n_paths;
    c.n_assets = fine.n_assets;
    c.n_defaults = fine.n_defaults;
    c.grid = TimeGrid{fine.grid.horizon, fine.steps() / factor};
    c.seed = fine.seed;
    c.has_regime = fine.has_regime;
    const int n = c.n_assets;
    const int p = c.n_defaults;
    const int pts = c.points();
    c.dw.assign(static_cast<std::size_t>(c.n_paths) * c.steps() * n, 0.0);
    c.prices.resize(static_cast<std::size_t>(c.n_paths) * pts * n);
    c.defaults.resize(static_cast<std::size_t>(c.n_paths) * pts * p);
    c.compensated.resize(static_cast<std::size_t>(c.n_paths) * pts * p);
    if (c.has_regime) c.regimes.resize(static_cast<std::size_t>(c.n_paths) * pts);
    for (std::size_t path = 0; path < static_cast<std::size_t>(c.n_paths); ++path) {
        for (int i = 0; i < pts; ++i) {
            const int fi = i * factor;
            std::copy_n(fine.S(path, fi).data(), n, c.prices.data() + (path * pts + i) * n);
            std::copy_n(fine.N(path, fi).data(), p, c.defaults.data() + (path * pts + i) * p);
            std::copy_n(fine.M(path, fi).data(), p, c.compensated.data() + (path * pts + i) * p);
            if (c.has_regime) c.regimes[path * pts + i] = fine.regime(path, fi);
            if (i == c.steps()) continue;
            for (int s = 0; s < factor; ++s) {
                const auto w = fine.dW(path, fi + s);
                for (int k = 0; k < n; ++k) c.dw[(path * c.steps() + i) * n + k] += w[k];
            }
        }
        bool multiple = false;
        for (int i = 0; i < c.steps() && !multiple; ++i) {
            int jumps = 0;
            for (int j = 0; j < p; ++j) jumps += c.N(path, i + 1)[j] - c.N(path, i)[j];
            multiple = jumps > 1;
        }
        c.same_cell_defaults += multiple ? 1 : 0;
    }
    return c;
}

StrategyContext strategy_context(const PathBundle& paths, std::size_t path, int step) {
    return StrategyContext{path, step, paths.grid.time(step), paths.S(path, step), paths.N(path, step),
                           paths.regime(path, step)};
}

StrategyFn constant_strategy(const SmallVec& value) {
    return [value](const StrategyContext&) { return value; };
}

WealthPath wealth_path(const ModelSpec& spec, const PathBundle& paths, const StrategyFn& controls,
                       StrategyKind kind, double x0) {
    WealthPath w;
    w.x0 = x0;
    w.kind = kind;
    w.n_paths = paths.n_paths;
    w.n_steps = paths.steps();
    w.n_assets = paths.n_assets;
    const int n = paths.n_assets;
    const int p = paths.n_defaults;
    const int m = paths.steps();
    const double dt = paths.grid.dt();
    w.controls.resize(static_cast<std::size_t>(w.n_paths) * m * n);
    w.wealth.resize(static_cast<std::size_t>(w.n_paths) * (m + 1));

    parallel_for(static_cast<std::size_t>(w.n_paths), [&](std::size_t path) {
        double* X = w.wealth.data() + path * (m + 1);
        X[0] = x0;
        for (int i = 0; i < m; ++i) {
            const SmallVec pi = controls(strategy_context(paths, path, i));
            if (pi.size() != n) throw ValidationError("strategy", "control dimension must equal n_assets");
            if (!pi.allFinite()) throw NumericalError("non-finite control", static_cast<long>(path), i);
            std::copy_n(pi.data(), n, w.controls.data() + (path * m + i) * n);
            const LocalCoefficients c = paths.coefficients(spec, path, i);
            const auto dW = paths.dW(path, i);
            const Eigen::Map<const Eigen::VectorXd> dw(dW.data(), n);
            const auto n0 = paths.N(path, i);
            const auto n1 = paths.N(path, i + 1);
            if (kind == StrategyKind::proportional) {
                const SmallVec exposure = c.sigma.transpose() * pi;
                double growth = std::exp(pi.dot(c.mu) * dt - 0.5 * exposure.squaredNorm() * dt +
                                         exposure.dot(dw));
                for (int j = 0; j < p; ++j) {
                    if (n1[j] > n0[j]) {
                        const double factor = 1.0 + pi.dot(c.beta.col(j));
                        if (factor < 0.0) {
                            throw NumericalError("admissibility violated: 1 + pi'beta < 0 at a default",
                                                 static_cast<long>(path), i);
                        }
                        growth *= factor;
                    }
                }
                X[i + 1] = X[i] * growth;
            } else {
                double gain = pi.dot(c.mu) * dt + pi.dot(c.sigma * dw);
                for (int j = 0; j < p; ++j) {
                    if (n1[j] > n0[j]) gain += pi.dot(c.beta.col(j));
                }
                X[i + 1] = X[i] + gain;
            }
            if (!std::isfinite(X[i + 1])) {
                throw NumericalError("wealth became non-finite", static_cast<long>(path), i);
            }
        }
    });
    return w;
}

void write_paths_csv(std::ostream& out, const PathBundle& paths, const WealthPath* wealth, int max_paths) {
    CsvWriter csv(out);
    std::vector<std::string> cols{"path_id", "step", "t"};
    for (int k = 0; k < paths.n_assets; ++k) cols.push_back("S_" + std::to_string(k + 1));
    for (int j = 0; j < paths.n_defaults; ++j) cols.push_back("N_" + std::to_string(j + 1));
    cols.push_back("X");
    csv.header(cols);
    const int count = std::min(max_paths, paths.n_paths);
    for (int path = 0; path < count; ++path) {
        for (int i = 0; i < paths.points(); ++i) {
            csv << path << i << paths.grid.time(i);
            for (double s : paths.S(path, i)) csv << s;
            for (auto d : paths.N(path, i)) csv << static_cast<long>(d);
            csv << (wealth ? wealth->X(path, i) : 1.0);
            csv.end_row();
        }
    }
}

}  // namespace credopt
