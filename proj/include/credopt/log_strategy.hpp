#pragma once

#include "credopt/filtering.hpp"

namespace credopt {

/// Optimal log-utility fraction for one asset and one default.
///
/// Pre-default with a jump (|beta| >= 1e-8, lambda > 0) this is the positive
/// root of mu - pi sigma^2 + lambda beta / (1 + pi beta) = 0, evaluated in a
/// cancellation-free form; otherwise the Merton fraction mu / sigma^2.
/// Throws ValidationError for sigma == 0 or lambda < 0.
double log_optimal_strategy(double mu, double sigma, double beta, double lambda, bool pre_default);

/// Pointwise log objective f(pi) = pi mu - pi^2 sigma^2 / 2 + lambda log(1 + pi beta);
/// -inf outside {1 + pi beta > 0} when lambda > 0.
double log_objective(double pi, double mu, double sigma, double beta, double lambda);

/// f'(pi) = mu - pi sigma^2 + lambda beta / (1 + pi beta).
double log_objective_derivative(double pi, double mu, double sigma, double beta, double lambda);

enum class CoefficientSource { exact, filtered };

struct LogSolution {
    int n_paths = 0;
    int n_steps = 0;
    double x0 = 1.0;
    std::vector<double> pi_hat;   // [path][point]
    std::vector<double> epsilon;  // [path][point], Merton fraction minus pi_hat
    MeanEstimate value;           // V(x0) with its Monte Carlo standard error

    double pi(std::size_t path, int point) const { return pi_hat[path * (n_steps + 1) + point]; }
    double eps(std::size_t path, int point) const { return epsilon[path * (n_steps + 1) + point]; }
};

/// Optimal log strategy along the paths and V(x0) = log x0 + E[int_0^T f_t(pi_t) dt],
/// with the time integral taken by the trapezoid rule on the grid. With
/// `filtered`, drift and intensity are replaced by their filtered values.
/// Requires n_assets == n_defaults == 1.
LogSolution log_value(const ModelSpec& spec, const PathBundle& paths, double x0, CoefficientSource source,
                      const FilterOutput* filter = nullptr);

/// CSV: t, pi_hat_mean, epsilon_mean, V, V_se.
void write_log_csv(std::ostream& out, const LogSolution& sol, const TimeGrid& grid);

}  // namespace credopt
