#include "credopt/paths.hpp"
#include "credopt/io.hpp"

#include "oracle_testkit/oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace credopt;

namespace {

ModelSpec two_name_model(double l1, double l2) {
    ModelSpec s;
    s.n_assets = 2;
    s.n_defaults = 2;
    s.s0 = Vec::Ones(2);
    s.mu = Vec::Constant(2, 0.03);
    s.sigma = Mat::Identity(2, 2) * 0.2;
    s.beta = Mat::Zero(2, 2);
    s.beta(0, 0) = -0.3;
    s.beta(1, 1) = -0.2;
    s.lambda = Vec(2);
    s.lambda << l1, l2;
    return s;
}

std::vector<double> terminal(const PathBundle& p, int j, bool compensated) {
    std::vector<double> v(p.n_paths);
    for (int i = 0; i < p.n_paths; ++i) v[i] = compensated ? p.M(i, p.steps())[j] : p.N(i, p.steps())[j];
    return v;
}

}  // namespace

TEST(Simulate, ZeroIntensityMeansNoDefaults) {
    const ModelSpec spec = constant_model(0.05, 0.2, -0.5, 0.0, 1.0);
    const PathBundle p = simulate_paths(spec, 20, 2000, 1);
    for (auto n : p.defaults) ASSERT_EQ(n, 0);
    for (double m : p.compensated) ASSERT_EQ(m, 0.0);
    // pure diffusion: every price step is the log-Euler step of dW alone
    const double dt = p.grid.dt();
    for (int i = 0; i < 50; ++i) {
        for (int s = 0; s < p.steps(); ++s) {
            const double expect = p.S(i, s)[0] * std::exp((0.05 - 0.02) * dt + 0.2 * p.dW(i, s)[0]);
            ASSERT_NEAR(p.S(i, s + 1)[0], expect, 1e-14 * expect);
        }
    }
}

TEST(Simulate, DefaultProbabilityMatchesExponentialClock) {
    const ModelSpec spec = constant_model(0.05, 0.2, -0.5, 0.5, 1.0);
    const PathBundle p = simulate_paths(spec, 50, 100000, 2024);
    const MeanEstimate e = estimate_mean(terminal(p, 0, false));
    EXPECT_NEAR(e.mean, 1.0 - std::exp(-0.5), 3.0 * e.se);
}

TEST(Simulate, CompensatedDefaultIsMartingale) {
    const PathBundle p = simulate_paths(two_name_model(0.4, 0.8), 40, 40000, 9);
    for (int j = 0; j < 2; ++j) {
        const MeanEstimate e = estimate_mean(terminal(p, j, true));
        EXPECT_NEAR(e.mean, 0.0, 3.0 * e.se) << "default " << j;
    }
}

TEST(Simulate, SameCellDefaultsVanishAsGridRefines) {
    const ModelSpec spec = two_name_model(1.5, 1.5);
    std::vector<long> counts;
    for (int m : {5, 20, 80}) counts.push_back(simulate_paths(spec, m, 20000, 77).same_cell_defaults);
    EXPECT_GT(counts[0], counts[1]);
    EXPECT_GT(counts[1], counts[2]);
    EXPECT_LT(counts[2], 0.01 * 20000);
}

TEST(Simulate, PricesPositiveAndDefaultsMonotone) {
    ModelSpec spec = two_name_model(2.0, 3.0);
    spec.beta(0, 0) = -0.9;
    const PathBundle p = simulate_paths(spec, 30, 5000, 5);
    for (double s : p.prices) ASSERT_GT(s, 0.0);
    for (int i = 0; i < p.n_paths; ++i) {
        for (int t = 0; t < p.steps(); ++t) {
            for (int j = 0; j < 2; ++j) ASSERT_LE(p.N(i, t)[j], p.N(i, t + 1)[j]);
        }
    }
}

TEST(Simulate, SeedDeterminism) {
    const ModelSpec spec = two_name_model(0.3, 0.6);
    const PathBundle a = simulate_paths(spec, 25, 3000, 123);
    const PathBundle b = simulate_paths(spec, 25, 3000, 123);
    const PathBundle c = simulate_paths(spec, 25, 3000, 124);
    EXPECT_EQ(a.dw, b.dw);
    EXPECT_EQ(a.prices, b.prices);
    EXPECT_EQ(a.defaults, b.defaults);
    EXPECT_EQ(a.compensated, b.compensated);
    EXPECT_NE(a.prices, c.prices);
    std::ostringstream sa, sb;
    write_paths_csv(sa, a, nullptr, 100);
    write_paths_csv(sb, b, nullptr, 100);
    EXPECT_EQ(sa.str(), sb.str());
}

TEST(Simulate, LogPriceMomentsWithoutJumps) {
    const double mu = 0.08, sigma = 0.3, T = 2.0;
    const ModelSpec spec = constant_model(mu, sigma, 0.0, 0.0, T);
    const PathBundle p = simulate_paths(spec, 16, 100000, 31);
    std::vector<double> x(p.n_paths), dev(p.n_paths);
    for (int i = 0; i < p.n_paths; ++i) x[i] = std::log(p.S(i, p.steps())[0]);
    const MeanEstimate m = estimate_mean(x);
    EXPECT_NEAR(m.mean, (mu - 0.5 * sigma * sigma) * T, 3.0 * m.se);
    const double var = sigma * sigma * T;
    for (int i = 0; i < p.n_paths; ++i) dev[i] = std::pow(x[i] - (mu - 0.5 * sigma * sigma) * T, 2);
    const MeanEstimate v = estimate_mean(dev);
    EXPECT_NEAR(v.mean, var, 3.0 * v.se);
}

TEST(Simulate, RejectsBadArguments) {
    const ModelSpec spec = constant_model(0.05, 0.2, -0.5, 0.1, 1.0);
    EXPECT_THROW(simulate_paths(spec, 1, 10, 1), ValidationError);
    EXPECT_THROW(simulate_paths(spec, 10, 0, 1), ValidationError);
    ModelSpec neg = spec;
    neg.lambda(0) = -0.1;
    EXPECT_THROW(simulate_paths(neg, 10, 10, 1), ValidationError);
    ModelSpec flat = spec;
    flat.sigma(0, 0) = 0.0;
    EXPECT_THROW(simulate_paths(flat, 10, 10, 1), ValidationError);
    ModelSpec zero_horizon = spec;
    zero_horizon.horizon = 0.0;
    EXPECT_THROW(simulate_paths(zero_horizon, 10, 10, 1), ValidationError);
}

TEST(Simulate, LocalVolatilityBandCheckedUpFront) {
    // floor and cap bound every factor the family can produce, so the band is
    // verified before any path is drawn
    ModelSpec spec = constant_model(0.05, 0.2, 0.0, 0.0, 1.0);
    spec.volatility.kind = VolatilityKind::local;
    spec.volatility.elasticity = -3.0;
    spec.volatility.reference = Vec::Ones(1);
    spec.volatility.floor = 1e-3;
    spec.volatility.cap = 1e3;
    spec.limits.ellipticity_upper = 0.05;
    EXPECT_THROW(simulate_paths(spec, 50, 20, 4), ValidationError);
    spec.volatility.cap = 1.0;
    spec.volatility.floor = 0.5;
    const PathBundle p = simulate_paths(spec, 50, 200, 4);
    for (double s : p.prices) ASSERT_GT(s, 0.0);
}

TEST(Wealth, ZeroStrategyKeepsInitialCapital) {
    const ModelSpec spec = constant_model(0.05, 0.2, -0.5, 1.0, 1.0);
    const PathBundle p = simulate_paths(spec, 20, 500, 8);
    for (StrategyKind kind : {StrategyKind::proportional, StrategyKind::amount}) {
        const WealthPath w = wealth_path(spec, p, constant_strategy(small_vec({0.0})), kind, 2.5);
        for (double x : w.wealth) ASSERT_EQ(x, 2.5);
    }
}

TEST(Wealth, PowerMomentMatchesClosedForm) {
    const double mu = 0.05, sigma = 0.2, beta = -0.5, lambda = 0.3, gamma = 0.5, pi = 0.8;
    const ModelSpec spec = constant_model(mu, sigma, beta, lambda, 1.0);
    const PathBundle p = simulate_paths(spec, 50, 100000, 10);
    const WealthPath w = wealth_path(spec, p, constant_strategy(small_vec({pi})), StrategyKind::proportional, 1.0);
    std::vector<double> v(p.n_paths);
    for (int i = 0; i < p.n_paths; ++i) v[i] = std::pow(w.X(i, p.steps()), gamma);
    const MeanEstimate e = estimate_mean(v);
    EXPECT_NEAR(e.mean, oracle::power_constant_oracle(pi, mu, sigma, beta, lambda, gamma, 1.0), 3.0 * e.se);
}

TEST(Wealth, TotalLossBoundary) {
    const ModelSpec spec = constant_model(0.05, 0.2, -0.5, 2.0, 1.0);
    const PathBundle p = simulate_paths(spec, 20, 2000, 12);
    const WealthPath w = wealth_path(spec, p, constant_strategy(small_vec({2.0})), StrategyKind::proportional, 1.0);
    int hit = 0;
    for (int i = 0; i < p.n_paths; ++i) {
        for (int t = 0; t <= p.steps(); ++t) {
            if (p.N(i, t)[0] == 1) {
                ASSERT_EQ(w.X(i, t), 0.0);
                ++hit;
            } else {
                ASSERT_GT(w.X(i, t), 0.0);
            }
        }
    }
    EXPECT_GT(hit, 0);
}

TEST(Wealth, InadmissibleJumpIsReported) {
    const ModelSpec spec = constant_model(0.05, 0.2, -0.5, 2.0, 1.0);
    const PathBundle p = simulate_paths(spec, 20, 200, 12);
    try {
        wealth_path(spec, p, constant_strategy(small_vec({2.5})), StrategyKind::proportional, 1.0);
        FAIL() << "expected a numerical error";
    } catch (const NumericalError& e) {
        EXPECT_GE(e.path(), 0);
        EXPECT_GE(e.step(), 0);
    }
}

TEST(Wealth, AmountKindAccumulatesArithmetically) {
    const ModelSpec spec = constant_model(0.05, 0.2, -0.5, 1.0, 1.0);
    const PathBundle p = simulate_paths(spec, 10, 100, 13);
    const double phi = 0.7;
    const WealthPath w = wealth_path(spec, p, constant_strategy(small_vec({phi})), StrategyKind::amount, 1.0);
    const double dt = p.grid.dt();
    for (int i = 0; i < p.n_paths; ++i) {
        double x = 1.0;
        for (int t = 0; t < p.steps(); ++t) {
            const double dn = p.N(i, t + 1)[0] - p.N(i, t)[0];
            x += phi * (0.05 * dt + 0.2 * p.dW(i, t)[0] - 0.5 * dn);
            ASSERT_NEAR(w.X(i, t + 1), x, 1e-13);
        }
    }
}

TEST(Wealth, CsvHasDocumentedColumns) {
    const PathBundle p = simulate_paths(two_name_model(0.2, 0.2), 4, 3, 1);
    std::ostringstream s;
    write_paths_csv(s, p, nullptr, 2);
    std::istringstream in(s.str());
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "path_id,step,t,S_1,S_2,N_1,N_2,X");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    EXPECT_EQ(rows, 2 * 5);
}

TEST(Coarsen, KeepsEveryFactorthPoint) {
    const PathBundle fine = simulate_paths(constant_model(0.05, 0.2, -0.5, 0.4, 1.0), 40, 100, 3);
    const PathBundle coarse = coarsen(fine, 4);
    ASSERT_EQ(coarse.steps(), 10);
    for (int i = 0; i < 100; ++i) {
        for (int t = 0; t <= 10; ++t) {
            ASSERT_EQ(coarse.S(i, t)[0], fine.S(i, 4 * t)[0]);
            ASSERT_EQ(coarse.N(i, t)[0], fine.N(i, 4 * t)[0]);
        }
        ASSERT_NEAR(coarse.dW(i, 0)[0], fine.dW(i, 0)[0] + fine.dW(i, 1)[0] + fine.dW(i, 2)[0] + fine.dW(i, 3)[0],
                    1e-15);
    }
}

TEST(Model, RiskPremiumAndEllipticity) {
    const ModelSpec spec = constant_model(0.06, 0.3, -0.2, 0.1, 1.0);
    const std::uint8_t alive[1] = {0};
    const LocalCoefficients c = spec.coefficients(std::span<const double>(spec.s0.data(), 1), alive, 0);
    const SmallVec theta = risk_premium(c);
    EXPECT_NEAR(theta[0], 0.2, 1e-15);
    EXPECT_TRUE(is_uniformly_elliptic(c.sigma, spec.limits));
    CoefficientLimits tight;
    tight.ellipticity_lower = 0.1;
    EXPECT_FALSE(is_uniformly_elliptic(c.sigma, tight));
}
