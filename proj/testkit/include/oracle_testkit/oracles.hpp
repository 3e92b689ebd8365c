#pragma once

// Reference computations for tests. Deliberately independent of the solver
// library: nothing here includes or links credopt.

#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

/// E[(X_T)^gamma] for X_0 = 1 under a constant fraction pi, one asset, one default:
/// exp((gamma pi mu + gamma(gamma-1)/2 pi^2 sigma^2) T) (e^{-lambda T} + (1 - e^{-lambda T})(1 + pi beta)^gamma).
double power_constant_oracle(double pi, double mu, double sigma, double beta, double lambda, double gamma, double T);

/// E[exp(-gamma X_T)] for X_0 = 0 under a constant amount phi:
/// exp((-gamma phi mu + gamma^2 phi^2 sigma^2 / 2) T) (e^{-lambda T} + (1 - e^{-lambda T}) e^{-gamma phi beta}).
double exp_constant_oracle(double phi, double mu, double sigma, double beta, double lambda, double gamma, double T);

struct GridOpt {
    double arg = 0.0;
    double value = 0.0;
};

/// Brute force: 1e5-point grid over [lo, hi], then golden-section polish on the
/// two neighbouring cells until the bracket is below tol. Maximizes.
GridOpt grid_argopt(const std::function<double(double)>& objective, double lo, double hi, double tol = 1e-10);

/// Same for a minimum.
GridOpt grid_argmin(const std::function<double(double)>& objective, double lo, double hi, double tol = 1e-10);

/// Lattice brute force in 2-d over [lo, hi]^2 (points per side) followed by a
/// coordinate-wise golden polish. Infeasible points should return -inf.
struct GridOpt2 {
    double x = 0.0;
    double y = 0.0;
    double value = 0.0;
};
GridOpt2 lattice_argmax2(const std::function<double(double, double)>& objective, double lo, double hi, int points,
                         double tol = 1e-10);

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Forward Monte Carlo of (X_T^pi)^gamma with exact terminal sampling
/// (W_T ~ N(0, T), tau ~ Exp(lambda)).
McEstimate forward_power_mc(double pi, double mu, double sigma, double beta, double lambda, double gamma, double T,
                            long paths, std::uint64_t seed);

/// Forward Monte Carlo of exp(-gamma X_T) for arithmetic wealth under a constant amount.
McEstimate forward_exp_mc(double phi, double mu, double sigma, double beta, double lambda, double gamma, double T,
                          long paths, std::uint64_t seed);

/// Two-regime (or more) hidden chain for one asset and one default with constant volatility.
struct PfModel {
    std::vector<std::vector<double>> q;  // rates, rows sum to zero
    std::vector<double> mu;
    std::vector<double> lambda;
    std::vector<double> initial;
    double sigma = 0.2;
    double beta = 0.0;
};

/// Bootstrap particle filter on one observed path (log prices at the grid
/// points, default indicator at the grid points). Particles move by exact
/// holding-time simulation of the chain; resampling is systematic, every step.
/// Returns the posterior mean of mu at each point given cells before it.
std::vector<double> particle_filter_mu(const PfModel& model, const std::vector<double>& log_prices,
                                       const std::vector<int>& defaults, double dt, int particles,
                                       std::uint64_t seed);

}  // namespace oracle
