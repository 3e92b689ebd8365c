#include "credopt/log_strategy.hpp"

#include "credopt/io.hpp"

#include <ostream>

namespace credopt {

double log_optimal_strategy(double mu, double sigma, double beta, double lambda, bool pre_default) {
    if (!(sigma != 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma", "must be nonzero");
    if (!(lambda >= 0.0)) throw ValidationError("lambda", "must be >= 0");
    const double s2 = sigma * sigma;
    const double merton = mu / s2;
    if (!pre_default || std::abs(beta) < 1e-8 || lambda == 0.0) return merton;

    // pi = mu/s2 - eps with (R - s)/(2 beta s2) = -eps, R^2 - s^2 = 4 lambda beta^2 s2.
    const double s = s2 + mu * beta;
    const double R = std::hypot(s, 2.0 * std::abs(beta) * std::abs(sigma) * std::sqrt(lambda));
    const double eps = s >= 0.0 ? -2.0 * lambda * beta / (R + s) : -(R - s) / (2.0 * beta * s2);
    return merton - eps;
}

double log_objective(double pi, double mu, double sigma, double beta, double lambda) {
    double v = pi * mu - 0.5 * pi * pi * sigma * sigma;
    if (lambda == 0.0) return v;
    const double g = 1.0 + pi * beta;
    if (!(g > 0.0)) return -kInf;
    return v + lambda * std::log1p(pi * beta);
}

double log_objective_derivative(double pi, double mu, double sigma, double beta, double lambda) {
    double d = mu - pi * sigma * sigma;
    if (lambda != 0.0) d += lambda * beta / (1.0 + pi * beta);
    return d;
}

LogSolution log_value(const ModelSpec& spec, const PathBundle& paths, double x0, CoefficientSource source,
                      const FilterOutput* filter) {
    if (spec.n_assets != 1 || spec.n_defaults != 1) {
        throw ValidationError("model.n_assets", "the closed-form log strategy needs one asset and one default");
    }
    if (!(x0 > 0.0)) throw ValidationError("x0", "initial capital must be positive");
    if (source == CoefficientSource::filtered) {
        if (!filter) throw ValidationError("filter", "filtered coefficients requested without a filter output");
        if (filter->n_paths != paths.n_paths || filter->n_steps != paths.steps()) {
            throw ValidationError("filter", "filter output does not belong to these paths");
        }
    }
    LogSolution sol;
    sol.n_paths = paths.n_paths;
    sol.n_steps = paths.steps();
    sol.x0 = x0;
    const int pts = paths.points();
    const double dt = paths.grid.dt();
    sol.pi_hat.resize(static_cast<std::size_t>(paths.n_paths) * pts);
    sol.epsilon.resize(sol.pi_hat.size());
    std::vector<double> integral(paths.n_paths);

    parallel_for(static_cast<std::size_t>(paths.n_paths), [&](std::size_t path) {
        double prev = 0.0, acc = 0.0;
        for (int i = 0; i < pts; ++i) {
            const LocalCoefficients c = paths.coefficients(spec, path, i);
            double mu = c.mu(0);
            double lambda = c.lambda(0);
            if (source == CoefficientSource::filtered) {
                mu = filter->mu(path, i)[0];
                lambda = filter->lambda(path, i)[0];
            }
            const double sigma = c.sigma(0, 0);
            const double beta = c.beta(0, 0);
            const bool alive = paths.N(path, i)[0] == 0;
            const double pi = log_optimal_strategy(mu, sigma, beta, lambda, alive);
            sol.pi_hat[path * pts + i] = pi;
            sol.epsilon[path * pts + i] = mu / (sigma * sigma) - pi;
            const double f = log_objective(pi, mu, sigma, beta, alive ? lambda : 0.0);
            if (i > 0) acc += 0.5 * (prev + f) * dt;
            prev = f;
        }
        integral[path] = std::log(x0) + acc;
    });
    sol.value = estimate_mean(integral);
    return sol;
}

void write_log_csv(std::ostream& out, const LogSolution& sol, const TimeGrid& grid) {
    CsvWriter csv(out);
    csv.header({"t", "pi_hat_mean", "epsilon_mean", "V", "V_se"});
    std::vector<double> pis(sol.n_paths), eps(sol.n_paths);
    for (int i = 0; i <= sol.n_steps; ++i) {
        for (int path = 0; path < sol.n_paths; ++path) {
            pis[path] = sol.pi(path, i);
            eps[path] = sol.eps(path, i);
        }
        csv << grid.time(i) << pairwise_sum(pis) / sol.n_paths << pairwise_sum(eps) / sol.n_paths
            << sol.value.mean << sol.value.se;
        csv.end_row();
    }
}

}  // namespace credopt
