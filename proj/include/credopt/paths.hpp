#pragma once

#include "credopt/model.hpp"

#include <iosfwd>

namespace credopt {

/// Simulated trajectories on a uniform grid. Per-point arrays hold
/// `steps + 1` entries per path, per-cell arrays hold `steps`.
struct PathBundle {
    int n_paths = 0;
    int n_assets = 1;
    int n_defaults = 1;
    TimeGrid grid;
    std::uint64_t seed = 0;
    bool has_regime = false;
    /// Paths on which two or more defaults landed in the same cell.
    long same_cell_defaults = 0;

    std::vector<double> dw;             // [path][step][asset]
    std::vector<double> prices;         // [path][point][asset]
    std::vector<std::uint8_t> defaults; // [path][point][default], N_t
    std::vector<double> compensated;    // [path][point][default], M_t
    std::vector<int> regimes;           // [path][point], only when has_regime

    int steps() const { return grid.steps; }
    int points() const { return grid.steps + 1; }

    std::span<const double> dW(std::size_t path, int step) const {
        return {dw.data() + (path * steps() + step) * n_assets, static_cast<std::size_t>(n_assets)};
    }
    std::span<const double> S(std::size_t path, int point) const {
        return {prices.data() + (path * points() + point) * n_assets, static_cast<std::size_t>(n_assets)};
    }
    std::span<const std::uint8_t> N(std::size_t path, int point) const {
        return {defaults.data() + (path * points() + point) * n_defaults,
                static_cast<std::size_t>(n_defaults)};
    }
    std::span<const double> M(std::size_t path, int point) const {
        return {compensated.data() + (path * points() + point) * n_defaults,
                static_cast<std::size_t>(n_defaults)};
    }
    int regime(std::size_t path, int point) const {
        return has_regime ? regimes[path * points() + point] : 0;
    }
    /// Coefficients driving cell [t_step, t_step+1) on a path (left-point values).
    LocalCoefficients coefficients(const ModelSpec& spec, std::size_t path, int step) const {
        return spec.coefficients(S(path, step), N(path, step), regime(path, step));
    }
};

/// Simulates prices, default indicators and compensated default martingales.
///
/// Defaults use the exponential clock: draw E ~ Exp(1) per default and trigger
/// the first time the accumulated (left-point) hazard reaches E; the jump is
/// booked at the right end of that cell and the compensator stops at the
/// crossing time. Prices move by the exact log-Euler step followed by the
/// multiplicative jump factors. Path i draws from its own generator seeded by
/// (seed, i), so output is bit-identical for identical inputs.
PathBundle simulate_paths(const ModelSpec& spec, int m_steps, int n_paths, std::uint64_t seed);

/// Keeps every `factor`-th grid point. For constant coefficients the result
/// has the law of a direct simulation on the coarse grid, which gives common
/// random numbers across step sizes.
PathBundle coarsen(const PathBundle& fine, int factor);

enum class StrategyKind { proportional, amount };

/// Information available when the control for cell [t_step, t_step+1) is chosen.
struct StrategyContext {
    std::size_t path = 0;
    int step = 0;
    double t = 0.0;
    std::span<const double> prices;
    std::span<const std::uint8_t> defaulted;
    int regime = 0;
};

using StrategyFn = std::function<SmallVec(const StrategyContext&)>;

StrategyContext strategy_context(const PathBundle& paths, std::size_t path, int step);

/// Fraction-of-wealth (pi) or currency-amount (phi) controls and the wealth they produce.
struct WealthPath {
    double x0 = 1.0;
    StrategyKind kind = StrategyKind::proportional;
    int n_paths = 0;
    int n_steps = 0;
    int n_assets = 1;
    std::vector<double> controls;  // [path][step][asset]
    std::vector<double> wealth;    // [path][point]

    double X(std::size_t path, int point) const { return wealth[path * (n_steps + 1) + point]; }
};

/// Proportional wealth uses the product form
///   X_{i+1} = X_i exp(pi'mu dt - |pi'sigma|^2 dt / 2 + pi'sigma dW) prod_j (1 + pi'beta_j dN_j),
/// amount wealth accumulates phi'(mu dt + sigma dW + beta dN).
/// Throws NumericalError if 1 + pi'beta_j < 0 at a default that occurs.
WealthPath wealth_path(const ModelSpec& spec, const PathBundle& paths, const StrategyFn& controls,
                       StrategyKind kind, double x0);

/// Constant strategy helper.
StrategyFn constant_strategy(const SmallVec& value);

/// Columnar export: path_id, step, t, S_1..S_n, N_1..N_p, X.
void write_paths_csv(std::ostream& out, const PathBundle& paths, const WealthPath* wealth,
                     int max_paths);

}  // namespace credopt
