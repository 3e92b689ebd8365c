#pragma once

#include "credopt/common.hpp"

#include <optional>

namespace credopt {

/// Finite-state Markov chain that modulates the drift and the default
/// intensities. The investor without insider information never observes it.
struct HiddenRegimeSpec {
    Mat q_matrix;                       // transition rates, rows sum to zero
    std::vector<Vec> mu_by_regime;      // drift vector per regime
    std::vector<Vec> lambda_by_regime;  // intensity vector per regime (per year)
    Vec initial_dist;

    int n_regimes() const { return static_cast<int>(initial_dist.size()); }
    void validate(int n_assets, int n_defaults, double coefficient_bound) const;
};

enum class VolatilityKind { constant, default_dependent, local };

/// Parametric families for sigma(t, S, t ^ tau). Each asset row of the base
/// matrix is multiplied by a factor depending on the observed state:
///   default_dependent: factor = post_default_scale once any default happened
///   local:             factor = clamp((S_i / reference_i)^elasticity, floor, cap),
///                      times post_default_scale after a default
struct VolatilityFamily {
    VolatilityKind kind = VolatilityKind::constant;
    double post_default_scale = 1.0;
    double elasticity = 0.0;
    Vec reference;
    double floor = 0.5;
    double cap = 2.0;
};

struct CoefficientLimits {
    double coefficient_bound = 10.0;
    double ellipticity_lower = 1e-6;
    double ellipticity_upper = 1e2;
};

/// Coefficients in force on one grid cell. `lambda` is already zero for
/// defaults that have occurred: an intensity only drives the first jump.
struct LocalCoefficients {
    SmallVec mu;
    SmallMat sigma;
    SmallMat beta;
    SmallVec lambda;
};

struct ModelSpec {
    int n_assets = 1;
    int n_defaults = 1;
    double horizon = 1.0;
    Vec s0;
    Vec mu;      // used when no regime model is attached
    Mat sigma;   // n x n base volatility
    Mat beta;    // n x p relative jump sizes at the defaults
    Vec lambda;  // used when no regime model is attached
    VolatilityFamily volatility;
    std::optional<HiddenRegimeSpec> regime_model;
    CoefficientLimits limits;

    /// Throws ValidationError naming the offending field.
    void validate() const;

    int n_regimes() const { return regime_model ? regime_model->n_regimes() : 1; }
    const Vec& drift(int regime) const;
    const Vec& intensity(int regime) const;

    SmallMat volatility_at(std::span<const double> prices,
                           std::span<const std::uint8_t> defaulted) const;
    LocalCoefficients coefficients(std::span<const double> prices,
                                   std::span<const std::uint8_t> defaulted, int regime) const;

    // Uniform bounds over regimes and volatility factors.
    double mu_sup() const;
    double sigma_sup() const;
    double beta_sup() const;
    double lambda_sup() const;
    /// Largest multiplicative volatility factor the family can produce.
    double volatility_factor_sup() const;
};

/// Risk premium theta = sigma' (sigma sigma')^{-1} mu; equals sigma^{-1} mu for
/// the square nonsingular volatilities used here.
SmallVec risk_premium(const LocalCoefficients& c);

/// True when eps I <= sigma sigma' <= K I.
bool is_uniformly_elliptic(const SmallMat& sigma, const CoefficientLimits& limits);

/// Single asset, single default, constant coefficients.
ModelSpec constant_model(double mu, double sigma, double beta, double lambda, double horizon,
                         double s0 = 1.0);

}  // namespace credopt
