#include "credopt/model.hpp"

#include <algorithm>

namespace credopt {
namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ValidationError(field, what);
}

void check_bounded(const Mat& m, double bound, const std::string& field) {
    require(m.allFinite(), field, "must be finite");
    require(m.cwiseAbs().maxCoeff() <= bound, field,
            "exceeds the configured coefficient bound " + std::to_string(bound));
}

}  // namespace

void HiddenRegimeSpec::validate(int n_assets, int n_defaults, double coefficient_bound) const {
    const int r = n_regimes();
    require(r >= 1, "regime.initial_dist", "needs at least one regime");
    require(q_matrix.rows() == r && q_matrix.cols() == r, "regime.q_matrix",
            "must be " + std::to_string(r) + "x" + std::to_string(r));
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
            if (i != j) require(q_matrix(i, j) >= 0.0, "regime.q_matrix", "off-diagonal rates must be >= 0");
        }
        require(std::abs(q_matrix.row(i).sum()) <= 1e-9, "regime.q_matrix", "rows must sum to 0");
    }
    require((initial_dist.array() >= 0.0).all() && std::abs(initial_dist.sum() - 1.0) <= 1e-9,
            "regime.initial_dist", "must be a probability vector");
    require(static_cast<int>(mu_by_regime.size()) == r, "regime.mu_by_regime", "one entry per regime");
    require(static_cast<int>(lambda_by_regime.size()) == r, "regime.lambda_by_regime",
            "one entry per regime");
    for (int i = 0; i < r; ++i) {
        require(mu_by_regime[i].size() == n_assets, "regime.mu_by_regime", "length must equal n_assets");
        require(lambda_by_regime[i].size() == n_defaults, "regime.lambda_by_regime",
                "length must equal n_defaults");
        check_bounded(mu_by_regime[i], coefficient_bound, "regime.mu_by_regime");
        check_bounded(lambda_by_regime[i], coefficient_bound, "regime.lambda_by_regime");
        require((lambda_by_regime[i].array() >= 0.0).all(), "regime.lambda_by_regime",
                "intensities must be >= 0");
    }
}

void ModelSpec::validate() const {
    require(n_assets >= 1 && n_assets <= kMaxDim, "model.n_assets",
            "must be in [1, " + std::to_string(kMaxDim) + "]");
    require(n_defaults >= 1 && n_defaults <= kMaxDim, "model.n_defaults",
            "must be in [1, " + std::to_string(kMaxDim) + "]");
    require(std::isfinite(horizon) && horizon > 0.0, "model.horizon", "must be positive");
    require(s0.size() == n_assets, "model.s0", "length must equal n_assets");
    require((s0.array() > 0.0).all(), "model.s0", "prices must be positive");
    require(sigma.rows() == n_assets && sigma.cols() == n_assets, "model.sigma", "must be n_assets x n_assets");
    require(beta.rows() == n_assets && beta.cols() == n_defaults, "model.beta", "must be n_assets x n_defaults");
    const double bound = limits.coefficient_bound;
    check_bounded(sigma, bound, "model.sigma");
    check_bounded(beta, bound, "model.beta");
    require((beta.array() > -1.0).all(), "model.beta", "jump sizes must be > -1 to keep prices positive");
    require(limits.ellipticity_lower > 0.0 && limits.ellipticity_lower < limits.ellipticity_upper,
            "model.limits", "need 0 < ellipticity_lower < ellipticity_upper");

    if (regime_model) {
        regime_model->validate(n_assets, n_defaults, bound);
    } else {
        require(mu.size() == n_assets, "model.mu", "length must equal n_assets");
        require(lambda.size() == n_defaults, "model.lambda", "length must equal n_defaults");
        check_bounded(mu, bound, "model.mu");
        check_bounded(lambda, bound, "model.lambda");
        require((lambda.array() >= 0.0).all(), "model.lambda", "intensities must be >= 0");
    }

    const auto& v = volatility;
    require(v.post_default_scale > 0.0, "model.volatility.post_default_scale", "must be positive");
    double lo = std::min(1.0, v.post_default_scale);
    double hi = std::max(1.0, v.post_default_scale);
    if (v.kind == VolatilityKind::local) {
        require(v.floor > 0.0 && v.cap >= v.floor, "model.volatility", "need 0 < floor <= cap");
        require(v.reference.size() == n_assets && (v.reference.array() > 0.0).all(),
                "model.volatility.reference", "one positive reference price per asset");
        require(std::isfinite(v.elasticity), "model.volatility.elasticity", "must be finite");
        lo *= v.floor;
        hi *= v.cap;
    }
    const Mat cov = sigma * sigma.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    require(eig.eigenvalues().minCoeff() * lo * lo >= limits.ellipticity_lower, "model.sigma",
            "sigma sigma' is not uniformly elliptic (smallest eigenvalue below the lower bound)");
    require(eig.eigenvalues().maxCoeff() * hi * hi <= limits.ellipticity_upper, "model.sigma",
            "sigma sigma' exceeds the ellipticity upper bound");
    require(sigma.cwiseAbs().maxCoeff() * hi <= bound, "model.sigma",
            "scaled volatility exceeds the coefficient bound");
}

const Vec& ModelSpec::drift(int regime) const {
    return regime_model ? regime_model->mu_by_regime.at(regime) : mu;
}

const Vec& ModelSpec::intensity(int regime) const {
    return regime_model ? regime_model->lambda_by_regime.at(regime) : lambda;
}

SmallMat ModelSpec::volatility_at(std::span<const double> prices,
                                  std::span<const std::uint8_t> defaulted) const {
    SmallMat out = sigma;
    if (volatility.kind == VolatilityKind::constant) return out;
    const bool any_default = std::any_of(defaulted.begin(), defaulted.end(), [](auto d) { return d != 0; });
    const double post = any_default ? volatility.post_default_scale : 1.0;
    for (int i = 0; i < n_assets; ++i) {
        double factor = post;
        if (volatility.kind == VolatilityKind::local) {
            const double level = std::pow(prices[i] / volatility.reference(i), volatility.elasticity);
            factor *= std::clamp(level, volatility.floor, volatility.cap);
        }
        out.row(i) *= factor;
    }
    return out;
}

LocalCoefficients ModelSpec::coefficients(std::span<const double> prices,
                                          std::span<const std::uint8_t> defaulted, int regime) const {
    LocalCoefficients c;
    c.mu = drift(regime);
    c.sigma = volatility_at(prices, defaulted);
    c.beta = beta;
    c.lambda = intensity(regime);
    for (int j = 0; j < n_defaults; ++j) {
        if (defaulted[j]) c.lambda(j) = 0.0;
    }
    return c;
}

double ModelSpec::mu_sup() const {
    if (!regime_model) return mu.cwiseAbs().maxCoeff();
    double s = 0.0;
    for (const auto& m : regime_model->mu_by_regime) s = std::max(s, m.cwiseAbs().maxCoeff());
    return s;
}

double ModelSpec::lambda_sup() const {
    if (!regime_model) return lambda.maxCoeff();
    double s = 0.0;
    for (const auto& l : regime_model->lambda_by_regime) s = std::max(s, l.maxCoeff());
    return s;
}

double ModelSpec::volatility_factor_sup() const {
    double hi = std::max(1.0, volatility.post_default_scale);
    if (volatility.kind == VolatilityKind::local) hi *= volatility.cap;
    return volatility.kind == VolatilityKind::constant ? 1.0 : hi;
}

double ModelSpec::sigma_sup() const { return sigma.cwiseAbs().maxCoeff() * volatility_factor_sup(); }

double ModelSpec::beta_sup() const { return beta.cwiseAbs().maxCoeff(); }

SmallVec risk_premium(const LocalCoefficients& c) {
    const SmallMat cov = c.sigma * c.sigma.transpose();
    const SmallVec w = cov.ldlt().solve(c.mu);
    return c.sigma.transpose() * w;
}

bool is_uniformly_elliptic(const SmallMat& sigma, const CoefficientLimits& limits) {
    if (!sigma.allFinite()) return false;
    if (sigma.rows() == 1) {
        const double v = sigma(0, 0) * sigma(0, 0);
        return v >= limits.ellipticity_lower && v <= limits.ellipticity_upper;
    }
    const Mat cov = sigma * sigma.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() >= limits.ellipticity_lower &&
           eig.eigenvalues().maxCoeff() <= limits.ellipticity_upper;
}

ModelSpec constant_model(double mu, double sigma, double beta, double lambda, double horizon,
                         double s0) {
    ModelSpec spec;
    spec.n_assets = 1;
    spec.n_defaults = 1;
    spec.horizon = horizon;
    spec.s0 = Vec::Constant(1, s0);
    spec.mu = Vec::Constant(1, mu);
    spec.sigma = Mat::Constant(1, 1, sigma);
    spec.beta = Mat::Constant(1, 1, beta);
    spec.lambda = Vec::Constant(1, lambda);
    return spec;
}

}  // namespace credopt
