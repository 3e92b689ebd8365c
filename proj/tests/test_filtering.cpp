#include "credopt/filtering.hpp"

#include "oracle_testkit/oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace credopt;

namespace {

ModelSpec two_regime(double q01 = 1.0, double q10 = 1.0) {
    ModelSpec s = constant_model(0.0, 0.2, -0.4, 0.0, 1.0);
    HiddenRegimeSpec h;
    h.q_matrix = Mat(2, 2);
    h.q_matrix << -q01, q01, q10, -q10;
    h.mu_by_regime = {Vec::Constant(1, 0.3), Vec::Constant(1, -0.2)};
    h.lambda_by_regime = {Vec::Constant(1, 0.1), Vec::Constant(1, 1.2)};
    h.initial_dist = Vec::Constant(2, 0.5);
    s.regime_model = h;
    return s;
}

std::vector<double> at_terminal(const FilterOutput& f, bool jump_part) {
    std::vector<double> v(f.n_paths);
    for (int i = 0; i < f.n_paths; ++i) v[i] = jump_part ? f.M_bar(i, f.n_steps)[0] : f.W_bar(i, f.n_steps)[0];
    return v;
}

}  // namespace

TEST(Filter, SingleRegimeIsDegenerate) {
    const ModelSpec spec = constant_model(0.07, 0.25, -0.3, 0.6, 1.0);
    const PathBundle p = simulate_paths(spec, 40, 2000, 3);
    const FilterOutput f = filter_paths(spec, p);
    const double rho = 0.07 / 0.25;
    for (int i = 0; i < p.n_paths; ++i) {
        for (int t = 0; t <= p.steps(); ++t) {
            ASSERT_EQ(f.pi(i, t)[0], 1.0);
            ASSERT_NEAR(f.mu(i, t)[0], 0.07, 1e-15);
            ASSERT_EQ(f.lambda(i, t)[0], p.N(i, t)[0] ? 0.0 : 0.6);
            ASSERT_NEAR(f.rho(i, t)[0], rho, 1e-15);
            ASSERT_NEAR(f.W_bar(i, t)[0], t == 0 ? 0.0 : f.W_bar(i, t - 1)[0] + p.dW(i, t - 1)[0], 1e-10);
            // xi = 1 / Lambda~ equals L when nothing is hidden
            ASSERT_NEAR(f.log_L[i * (p.steps() + 1) + t], -f.log_Lambda_tilde[i * (p.steps() + 1) + t], 1e-9);
        }
    }
}

TEST(Filter, FrozenUninformativeChainKeepsPrior) {
    ModelSpec spec = two_regime(0.0, 0.0);
    auto& h = *spec.regime_model;
    h.mu_by_regime[1] = h.mu_by_regime[0];
    h.lambda_by_regime[1] = h.lambda_by_regime[0];
    h.initial_dist << 0.3, 0.7;
    const PathBundle p = simulate_paths(spec, 30, 500, 4);
    const FilterOutput f = filter_paths(spec, p);
    for (int i = 0; i < p.n_paths; ++i) {
        for (int t = 0; t <= p.steps(); ++t) {
            ASSERT_NEAR(f.pi(i, t)[0], 0.3, 1e-12);
            ASSERT_NEAR(f.pi(i, t)[1], 0.7, 1e-12);
        }
    }
}

TEST(Filter, PosteriorStaysOnSimplex) {
    const ModelSpec spec = two_regime(2.0, 0.5);
    const PathBundle p = simulate_paths(spec, 100, 3000, 5);
    const FilterOutput f = filter_paths(spec, p);
    for (int i = 0; i < p.n_paths; ++i) {
        for (int t = 0; t <= p.steps(); ++t) {
            const auto pi = f.pi(i, t);
            ASSERT_GE(pi[0], 0.0);
            ASSERT_LE(pi[0], 1.0);
            ASSERT_GE(pi[1], 0.0);
            ASSERT_LE(pi[1], 1.0);
            ASSERT_NEAR(pi[0] + pi[1], 1.0, 1e-12);
        }
    }
    EXPECT_EQ(f.zero_likelihood_events, 0);
}

TEST(Filter, InnovationsAreCentred) {
    const ModelSpec spec = two_regime();
    const PathBundle p = simulate_paths(spec, 50, 40000, 6);
    const FilterOutput f = filter_paths(spec, p);
    const MeanEstimate w = estimate_mean(at_terminal(f, false));
    const MeanEstimate m = estimate_mean(at_terminal(f, true));
    EXPECT_NEAR(w.mean, 0.0, 3.0 * w.se);
    EXPECT_NEAR(m.mean, 0.0, 3.0 * m.se);
}

TEST(Filter, QuadraticVariations) {
    const ModelSpec spec = two_regime();
    const int m = 100;
    const PathBundle p = simulate_paths(spec, m, 5000, 7);
    const FilterOutput f = filter_paths(spec, p);
    const double dt = p.grid.dt();
    std::vector<double> qv(p.n_paths);
    for (int i = 0; i < p.n_paths; ++i) {
        double w = 0.0, jm = 0.0;
        for (int t = 0; t < m; ++t) {
            const double dw = f.W_bar(i, t + 1)[0] - f.W_bar(i, t)[0];
            const double dm = f.M_bar(i, t + 1)[0] - f.M_bar(i, t)[0];
            w += dw * dw;
            jm += dm * dm;
        }
        qv[i] = w;
        // [M-bar] = N up to the compensator's O(dt) contribution
        ASSERT_NEAR(jm, p.N(i, m)[0], 2.0 * 1.2 * dt + 1.2 * 1.2 * dt);
    }
    const MeanEstimate e = estimate_mean(qv);
    // the drift error (mu - mu_tilde) / sigma dt adds at most dt (spread / sigma)^2 / 4
    const double bias = dt * std::pow((0.3 + 0.2) / 0.2, 2) / 4.0;
    EXPECT_GE(e.mean, 1.0 - 3.0 * e.se);
    EXPECT_LE(e.mean, 1.0 + bias + 3.0 * e.se);
}

TEST(Filter, FilteredIntensityMatchesTrueOnAverage) {
    const ModelSpec spec = two_regime();
    const PathBundle p = simulate_paths(spec, 50, 40000, 8);
    const FilterOutput f = filter_paths(spec, p);
    for (int t : {10, 25, 49}) {
        std::vector<double> diff(p.n_paths);
        for (int i = 0; i < p.n_paths; ++i) {
            const double truth = p.N(i, t)[0] ? 0.0 : spec.intensity(p.regime(i, t))(0);
            diff[i] = f.lambda(i, t)[0] - truth;
        }
        const MeanEstimate e = estimate_mean(diff);
        EXPECT_NEAR(e.mean, 0.0, 3.0 * e.se) << "point " << t;
    }
}

TEST(Filter, BeatsThePriorMean) {
    const ModelSpec spec = two_regime(0.5, 0.5);
    const PathBundle p = simulate_paths(spec, 100, 5000, 9);
    const FilterOutput f = filter_paths(spec, p);
    double mse_filter = 0.0, mse_prior = 0.0;
    for (int i = 0; i < p.n_paths; ++i) {
        for (int t = 0; t <= p.steps(); ++t) {
            const double truth = spec.drift(p.regime(i, t))(0);
            mse_filter += std::pow(f.mu(i, t)[0] - truth, 2);
            mse_prior += std::pow(0.05 - truth, 2);
        }
    }
    EXPECT_LT(mse_filter, 0.9 * mse_prior);
}

TEST(Filter, AgreesWithParticleFilter) {
    const ModelSpec spec = two_regime();
    const int m = 50;
    const PathBundle p = simulate_paths(spec, m, 4, 10);
    const FilterOutput f = filter_paths(spec, p);
    const auto& h = *spec.regime_model;
    oracle::PfModel pf;
    pf.q = {{h.q_matrix(0, 0), h.q_matrix(0, 1)}, {h.q_matrix(1, 0), h.q_matrix(1, 1)}};
    pf.mu = {h.mu_by_regime[0](0), h.mu_by_regime[1](0)};
    pf.lambda = {h.lambda_by_regime[0](0), h.lambda_by_regime[1](0)};
    pf.initial = {0.5, 0.5};
    pf.sigma = 0.2;
    pf.beta = -0.4;
    double err = 0.0, self = 0.0;
    int count = 0;
    for (int i = 0; i < p.n_paths; ++i) {
        std::vector<double> logs(m + 1);
        std::vector<int> n(m + 1);
        for (int t = 0; t <= m; ++t) {
            logs[t] = std::log(p.S(i, t)[0]);
            n[t] = p.N(i, t)[0];
        }
        const auto a = oracle::particle_filter_mu(pf, logs, n, p.grid.dt(), 4000, 100 + i);
        const auto b = oracle::particle_filter_mu(pf, logs, n, p.grid.dt(), 4000, 900 + i);
        for (int t = 0; t <= m; ++t) {
            err += std::pow(f.mu(i, t)[0] - a[t], 2);
            self += std::pow(a[t] - b[t], 2);
            ++count;
        }
    }
        // two independent runs differ by sqrt(2) times the noise of one run
    EXPECT_LE(std::sqrt(err / count), 2.0 * std::sqrt(self / count / 2.0));
}

TEST(Filter, ZeroLikelihoodCellsAreCountedAndReset) {
    // Defaults observed under a model that says they cannot happen.
    ModelSpec sim = two_regime();
    const PathBundle p = simulate_paths(sim, 20, 500, 11);
    ModelSpec blind = sim;
    blind.regime_model->lambda_by_regime = {Vec::Zero(1), Vec::Zero(1)};
    const FilterOutput f = filter_paths(blind, p);
    long defaults = 0;
    for (int i = 0; i < p.n_paths; ++i) defaults += p.N(i, p.steps())[0];
    ASSERT_GT(defaults, 0);
    EXPECT_EQ(f.zero_likelihood_events, defaults);
    for (double x : f.posterior) ASSERT_TRUE(std::isfinite(x));
}

TEST(MeasureChange, ZeroPremiumGivesUnitDensities) {
    ModelSpec spec = two_regime();
    spec.regime_model->mu_by_regime = {Vec::Zero(1), Vec::Zero(1)};
    const PathBundle p = simulate_paths(spec, 20, 300, 12);
    const FilterOutput f = filter_paths(spec, p);
    for (int i = 0; i < p.n_paths; ++i) {
        for (int t = 0; t <= p.steps(); ++t) {
            ASSERT_EQ(f.L(i, t), 1.0);
            ASSERT_EQ(f.Lambda_tilde(i, t), 1.0);
        }
    }
}

TEST(MeasureChange, LikelihoodHasUnitMean) {
    const ModelSpec spec = two_regime();
    const PathBundle p = simulate_paths(spec, 50, 40000, 13);
    const FilterOutput f = filter_paths(spec, p);
    const MeasureChange mc = measure_change(spec, p, f);
    std::vector<double> L(p.n_paths);
    for (int i = 0; i < p.n_paths; ++i) {
        L[i] = std::exp(mc.log_L[i * (p.steps() + 1) + p.steps()]);
        ASSERT_GT(f.Lambda_tilde(i, p.steps()), 0.0);
    }
    EXPECT_EQ(mc.log_L, f.log_L);
    const MeanEstimate e = estimate_mean(L);
    EXPECT_NEAR(e.mean, 1.0, 3.0 * e.se);
}

TEST(Filter, CsvColumns) {
    const ModelSpec spec = two_regime();
    const PathBundle p = simulate_paths(spec, 5, 3, 1);
    std::ostringstream s;
    write_filter_csv(s, filter_paths(spec, p), 2);
    std::istringstream in(s.str());
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "path_id,step,posterior_1,posterior_2,mu_tilde,lambda_tilde");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    EXPECT_EQ(rows, 2 * 6);
}
