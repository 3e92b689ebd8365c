#pragma once

#include "credopt/bsde.hpp"

namespace credopt {

/// Admissible strategies bounded by k in every component. For power utility the
/// jump constraint 1 + pi'beta_j >= kJumpFloor is added for defaults still alive.
struct StrategyBound {
    double k = 1.0;
};

inline constexpr double kJumpFloor = 1e-12;

struct ScalarInputs {
    double mu = 0.0;
    double sigma = 1.0;
    double beta = 0.0;
    double lambda = 0.0;  // zero once the default has happened
    double gamma = 0.5;
    double y = 1.0;
    double z = 0.0;
    double u = 0.0;
};

struct ScalarOpt {
    double value = 0.0;
    double arg = 0.0;
};

/// h(pi) = gamma pi (mu y + sigma z) + gamma(gamma-1)/2 pi^2 sigma^2 y + lambda((1+pi beta)^gamma - 1)(y + u).
double power_h(double pi, const ScalarInputs& in);
double power_h_derivative(double pi, const ScalarInputs& in);
/// Feasible interval [-k, k] intersected with {1 + pi beta >= kJumpFloor} when lambda > 0.
std::pair<double, double> power_feasible(const ScalarInputs& in, const StrategyBound& bound);
/// Maximizer of power_h over the feasible interval; value == power_h(arg).
ScalarOpt power_sup(const ScalarInputs& in, const StrategyBound& bound);

/// h(phi) = gamma^2/2 phi^2 sigma^2 y - gamma phi (y mu + sigma z) - (1 - e^{-gamma phi beta}) lambda (y + u).
double exp_h(double phi, const ScalarInputs& in);
double exp_h_derivative(double phi, const ScalarInputs& in);
/// Minimizer of exp_h over [-k, k]; value == exp_h(arg).
ScalarOpt exp_inf(const ScalarInputs& in, const StrategyBound& bound);

struct VectorInputs {
    LocalCoefficients coeffs;  // lambda zero for defaults that have happened
    double gamma = 0.5;
    double y = 1.0;
    SmallVec z;
    SmallVec u;
};

struct VectorOpt {
    double value = 0.0;
    SmallVec arg;
    bool certified = false;  // two or more multistarts agreed; otherwise the lattice fallback ran
    int agreeing_starts = 0;
};

double power_h_vector(const SmallVec& pi, const VectorInputs& in);
double exp_h_vector(const SmallVec& phi, const VectorInputs& in);
/// Projected-gradient ascent from 0 and 8 seeded random corners of the feasible
/// set (box plus jump half-spaces, projected by Dykstra's algorithm).
VectorOpt power_sup_vector(const VectorInputs& in, const StrategyBound& bound);
VectorOpt exp_inf_vector(const VectorInputs& in, const StrategyBound& bound);
/// Euclidean projection onto [-k,k]^n intersected with {a_j'x >= b_j}.
SmallVec project_feasible(const SmallVec& x, double k, const std::vector<std::pair<SmallVec, double>>& halfspaces);

/// Uniform bound on the power value process for strategies bounded by k:
/// (1 + k max_j sum_i|beta_ij|)^{gamma p} exp((gamma k sum|mu_i| + gamma^2 k^2 sum_l (sum_i |sigma_il|)^2 / 2) T),
/// with sup-norm coefficients. For one asset and one default this is
/// (1 + k|beta|)^gamma exp((gamma k |mu| + gamma^2 (k sigma)^2 / 2) T).
double power_value_bound(const ModelSpec& spec, double gamma, double k);

/// Driver of the k-bounded power problem (esssup of h over A^k), with the
/// declared Lipschitz constant and the value bound above.
GeneratorSpec power_generator(const ModelSpec& spec, double gamma, const StrategyBound& bound);

/// Driver of the k-bounded exponential problem (essinf over A^k) with terminal
/// exp(-gamma claim(path)); Y is bounded by exp(-gamma claim_lower_bound).
GeneratorSpec exp_generator(const ModelSpec& spec, double gamma, const StrategyBound& bound,
                            std::function<double(std::size_t)> claim, double claim_lower_bound);

struct KPoint {
    double k = 0.0;
    double value = 0.0;
    double se = 0.0;
};

struct KLimitReport {
    double limit = 0.0;               // last value; no extrapolation
    std::vector<double> increments;   // value differences between consecutive k
    bool monotone = true;             // within 2 standard errors
    std::vector<int> violations;      // index i where step i -> i+1 breaks monotonicity
    bool shrinking = true;            // absolute increments nonincreasing
};

/// Checks the k-sequence is monotone (nondecreasing when `increasing`) within
/// 2 SE and reports the last value as the limit estimate.
KLimitReport k_limit(const std::vector<KPoint>& values, bool increasing = true);

}  // namespace credopt
