#pragma once

#include "credopt/paths.hpp"

namespace credopt {

/// Posterior over hidden regimes and the quantities derived from it, on the
/// grid of the PathBundle it was computed from. Point arrays have steps + 1
/// entries per path. `posterior(path, i)` conditions on observations of cells
/// 0..i-1 only, so every point value is usable as a left-point (predictable)
/// coefficient for cell i.
struct FilterOutput {
    int n_paths = 0;
    int n_steps = 0;
    int n_regimes = 1;
    int n_assets = 1;
    int n_defaults = 1;
    double dt = 0.0;

    std::vector<double> posterior;     // [path][point][regime]
    std::vector<double> mu_tilde;      // [path][point][asset]
    std::vector<double> lambda_tilde;  // [path][point][default], zero after the default
    std::vector<double> rho_tilde;     // [path][point][asset]
    std::vector<double> dw_obs;        // [path][step][asset], increments of the observable W~
    std::vector<double> w_bar;         // [path][point][asset], innovation W-bar
    std::vector<double> m_bar;         // [path][point][default], innovation M-bar
    std::vector<double> log_L;         // [path][point]
    std::vector<double> log_Lambda_tilde;  // [path][point]
    /// Cells where every regime had zero likelihood and the posterior was reset.
    long zero_likelihood_events = 0;

    int points() const { return n_steps + 1; }
    std::span<const double> pi(std::size_t path, int point) const {
        return {posterior.data() + (path * points() + point) * n_regimes, static_cast<std::size_t>(n_regimes)};
    }
    std::span<const double> mu(std::size_t path, int point) const {
        return {mu_tilde.data() + (path * points() + point) * n_assets, static_cast<std::size_t>(n_assets)};
    }
    std::span<const double> lambda(std::size_t path, int point) const {
        return {lambda_tilde.data() + (path * points() + point) * n_defaults,
                static_cast<std::size_t>(n_defaults)};
    }
    std::span<const double> rho(std::size_t path, int point) const {
        return {rho_tilde.data() + (path * points() + point) * n_assets, static_cast<std::size_t>(n_assets)};
    }
    std::span<const double> dW_obs(std::size_t path, int step) const {
        return {dw_obs.data() + (path * n_steps + step) * n_assets, static_cast<std::size_t>(n_assets)};
    }
    std::span<const double> W_bar(std::size_t path, int point) const {
        return {w_bar.data() + (path * points() + point) * n_assets, static_cast<std::size_t>(n_assets)};
    }
    std::span<const double> M_bar(std::size_t path, int point) const {
        return {m_bar.data() + (path * points() + point) * n_defaults, static_cast<std::size_t>(n_defaults)};
    }
    double L(std::size_t path, int point) const { return std::exp(log_L[path * points() + point]); }
    double Lambda_tilde(std::size_t path, int point) const {
        return std::exp(log_Lambda_tilde[path * points() + point]);
    }
};

/// Exact discrete Bayes filter for the regime chain given prices and defaults.
///
/// For cell i the predictive posterior pi_i is corrected with the cell's
/// observations: the Gaussian likelihood of the continuous part of the
/// log-price increment under each regime drift, times 1 - exp(-lambda_r dt) if a
/// default lands in the cell or exp(-lambda_r dt) otherwise. The corrected
/// weights are pushed through exp(Q dt)' to give pi_{i+1}. All arithmetic is in log space.
/// The true regime path in `paths` is never read.
FilterOutput filter_paths(const ModelSpec& spec, const PathBundle& paths);

/// Likelihood processes in log space: log L uses the true risk premium and W,
/// log Lambda~ the filtered premium and the observable W~. Also stored on the
/// FilterOutput by filter_paths; exposed separately for diagnostics.
struct MeasureChange {
    std::vector<double> log_L;
    std::vector<double> log_Lambda_tilde;
};

MeasureChange measure_change(const ModelSpec& spec, const PathBundle& paths, const FilterOutput& filter);

/// CSV: path_id, step, posterior_1..R, mu_tilde, lambda_tilde (first asset/default).
void write_filter_csv(std::ostream& out, const FilterOutput& filter, int max_paths);

}  // namespace credopt
