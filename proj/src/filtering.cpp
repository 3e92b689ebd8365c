#include "credopt/filtering.hpp"

#include "credopt/io.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <ostream>

namespace credopt {
namespace {

double log_sum_exp(const Vec& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

FilterOutput filter_paths(const ModelSpec& spec, const PathBundle& paths) {
    spec.validate();
    if (paths.n_assets != spec.n_assets || paths.n_defaults != spec.n_defaults) {
        throw ValidationError("paths", "dimensions do not match the model");
    }
    const int R = spec.n_regimes();
    if (R > 64) throw ValidationError("regime.initial_dist", "at most 64 regimes are supported");
    const int n = spec.n_assets;
    const int p = spec.n_defaults;
    const int m = paths.steps();
    const int pts = paths.points();
    const double dt = paths.grid.dt();

    FilterOutput f;
    f.n_paths = paths.n_paths;
    f.n_steps = m;
    f.n_regimes = R;
    f.n_assets = n;
    f.n_defaults = p;
    f.dt = dt;
    const std::size_t np = static_cast<std::size_t>(paths.n_paths);
    f.posterior.resize(np * pts * R);
    f.mu_tilde.resize(np * pts * n);
    f.lambda_tilde.resize(np * pts * p);
    f.rho_tilde.resize(np * pts * n);
    f.dw_obs.resize(np * m * n);
    f.w_bar.resize(np * pts * n);
    f.m_bar.resize(np * pts * p);

    // The chain is sampled on the grid, so the one-step transition matrix is exp(Q dt).
    Mat transition = Mat::Identity(R, R);
    Vec prior = Vec::Ones(R);
    std::vector<Vec> mu_r(R), lambda_r(R);
    for (int r = 0; r < R; ++r) {
        mu_r[r] = spec.drift(r);
        lambda_r[r] = spec.intensity(r);
    }
    if (spec.regime_model) {
        transition = (spec.regime_model->q_matrix * dt).exp();
        prior = spec.regime_model->initial_dist;
    }

    std::vector<long> reset_counts(np, 0);
    parallel_for(np, [&](std::size_t path) {
        Vec post = prior;
        SmallVec w_bar = SmallVec::Zero(n), m_bar = SmallVec::Zero(p);
        Vec log_w(R);
        for (int i = 0; i <= m; ++i) {
            const auto S0 = paths.S(path, i);
            const auto N0 = paths.N(path, i);
            const SmallMat sigma = spec.volatility_at(S0, N0);
            const auto lu = sigma.partialPivLu();

            SmallVec mu_t = SmallVec::Zero(n), lam_t = SmallVec::Zero(p);
            for (int r = 0; r < R; ++r) {
                mu_t += post(r) * mu_r[r];
                lam_t += post(r) * lambda_r[r];
            }
            for (int j = 0; j < p; ++j) {
                if (N0[j]) lam_t(j) = 0.0;
            }
            const SmallVec rho_t = lu.solve(mu_t);
            const std::size_t at = path * pts + i;
            std::copy_n(post.data(), R, f.posterior.data() + at * R);
            std::copy_n(mu_t.data(), n, f.mu_tilde.data() + at * n);
            std::copy_n(lam_t.data(), p, f.lambda_tilde.data() + at * p);
            std::copy_n(rho_t.data(), n, f.rho_tilde.data() + at * n);
            std::copy_n(w_bar.data(), n, f.w_bar.data() + at * n);
            std::copy_n(m_bar.data(), p, f.m_bar.data() + at * p);
            if (i == m) break;

            // Observations of cell i: the continuous log-price increment and the defaults.
            const auto S1 = paths.S(path, i + 1);
            const auto N1 = paths.N(path, i + 1);
            SmallVec y(n);
            for (int k = 0; k < n; ++k) {
                double jump = 0.0;
                for (int j = 0; j < p; ++j) {
                    if (N1[j] > N0[j]) jump += std::log1p(spec.beta(k, j));
                }
                y(k) = std::log(S1[k] / S0[k]) - jump;
            }
            const SmallVec half_var = 0.5 * (sigma * sigma.transpose()).diagonal();
            const SmallVec dw_obs = lu.solve(SmallVec(y + half_var * dt));
            std::copy_n(dw_obs.data(), n, f.dw_obs.data() + (path * m + i) * n);

            SmallVec crossing = SmallVec::Zero(p);
            for (int r = 0; r < R; ++r) {
                const SmallVec rho_r = lu.solve(SmallVec(mu_r[r]));
                double ll = -(dw_obs - rho_r * dt).squaredNorm() / (2.0 * dt);
                for (int j = 0; j < p; ++j) {
                    if (N0[j]) continue;
                    // exact cell probability of the clock crossing under a frozen regime
                    const double q = -std::expm1(-lambda_r[r](j) * dt);
                    crossing(j) += post(r) * q;
                    ll += N1[j] > N0[j] ? std::log(q) : std::log1p(-q);
                }
                log_w(r) = post(r) > 0.0 ? std::log(post(r)) + ll : -kInf;
            }
            const double norm = log_sum_exp(log_w);
            Vec corrected(R);
            if (!std::isfinite(norm)) {
                corrected.setConstant(1.0 / R);
                ++reset_counts[path];
            } else {
                for (int r = 0; r < R; ++r) corrected(r) = std::exp(log_w(r) - norm);
            }

            w_bar += dw_obs - rho_t * dt;
            // The compensator increment is the predictive crossing probability of the cell,
            // which makes M-bar a martingale on the grid.
            for (int j = 0; j < p; ++j) m_bar(j) += static_cast<double>(N1[j] - N0[j]) - crossing(j);

            post = transition.transpose() * corrected;
            post = post.cwiseMax(0.0);
            post /= post.sum();
        }
    });
    for (long c : reset_counts) f.zero_likelihood_events += c;
    MeasureChange mc = measure_change(spec, paths, f);
    f.log_L = std::move(mc.log_L);
    f.log_Lambda_tilde = std::move(mc.log_Lambda_tilde);
    return f;
}

MeasureChange measure_change(const ModelSpec& spec, const PathBundle& paths, const FilterOutput& filter) {
    if (filter.n_paths != paths.n_paths || filter.n_steps != paths.steps()) {
        throw ValidationError("filter", "filter output does not belong to these paths");
    }
    const int n = paths.n_assets;
    const int m = paths.steps();
    const int pts = paths.points();
    const double dt = paths.grid.dt();
    MeasureChange out;
    out.log_L.resize(static_cast<std::size_t>(paths.n_paths) * pts);
    out.log_Lambda_tilde.resize(out.log_L.size());
    parallel_for(static_cast<std::size_t>(paths.n_paths), [&](std::size_t path) {
        double log_l = 0.0, log_lt = 0.0;
        for (int i = 0; i <= m; ++i) {
            out.log_L[path * pts + i] = log_l;
            out.log_Lambda_tilde[path * pts + i] = log_lt;
            if (i == m) break;
            const LocalCoefficients c = paths.coefficients(spec, path, i);
            const SmallVec rho = c.sigma.partialPivLu().solve(c.mu);
            const Eigen::Map<const Eigen::VectorXd> dw(paths.dW(path, i).data(), n);
            const Eigen::Map<const Eigen::VectorXd> dw_obs(filter.dW_obs(path, i).data(), n);
            const Eigen::Map<const Eigen::VectorXd> rho_t(filter.rho(path, i).data(), n);
            log_l += -rho.dot(dw) - 0.5 * rho.squaredNorm() * dt;
            log_lt += rho_t.dot(dw_obs) - 0.5 * rho_t.squaredNorm() * dt;
            if (!std::isfinite(log_l) || !std::isfinite(log_lt)) {
                throw NumericalError("non-finite measure-change integrand", static_cast<long>(path), i);
            }
        }
    });
    return out;
}

void write_filter_csv(std::ostream& out, const FilterOutput& filter, int max_paths) {
    CsvWriter csv(out);
    std::vector<std::string> cols{"path_id", "step"};
    for (int r = 0; r < filter.n_regimes; ++r) cols.push_back("posterior_" + std::to_string(r + 1));
    cols.push_back("mu_tilde");
    cols.push_back("lambda_tilde");
    csv.header(cols);
    const int count = std::min(max_paths, filter.n_paths);
    for (int path = 0; path < count; ++path) {
        for (int i = 0; i < filter.points(); ++i) {
            csv << path << i;
            for (double v : filter.pi(path, i)) csv << v;
            csv << filter.mu(path, i)[0] << filter.lambda(path, i)[0];
            csv.end_row();
        }
    }
}

}  // namespace credopt
