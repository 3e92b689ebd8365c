#include "credopt/pricing.hpp"

#include "oracle_testkit/oracles.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <sstream>

using namespace credopt;

namespace {

const ModelSpec& benchmark() {
    static const ModelSpec spec = constant_model(0.05, 0.2, -0.5, 0.1, 1.0);
    return spec;
}

const PathBundle& benchmark_paths() {
    static const PathBundle p = simulate_paths(benchmark(), 25, 16000, 21);
    return p;
}

ClaimSpec claim(ClaimKind kind, double amount = 1.0, double cash = 0.0) {
    ClaimSpec c;
    c.kind = kind;
    c.amount = amount;
    c.cash = cash;
    return c;
}

ModelSpec two_regime() {
    ModelSpec s = constant_model(0.0, 0.2, -0.4, 0.0, 1.0);
    HiddenRegimeSpec h;
    h.q_matrix = Mat(2, 2);
    h.q_matrix << -1.0, 1.0, 1.0, -1.0;
    h.mu_by_regime = {Vec::Constant(1, 0.15), Vec::Constant(1, -0.05)};
    h.lambda_by_regime = {Vec::Constant(1, 0.05), Vec::Constant(1, 0.6)};
    h.initial_dist = Vec::Constant(2, 0.5);
    s.regime_model = h;
    return s;
}

}  // namespace

TEST(ExpValue, NoTradingNoClaimIsOne) {
    const ExpValue v =
        exp_value(nullptr, Information::full, StrategyBound{0.0}, benchmark(), benchmark_paths(), nullptr, {});
    EXPECT_NEAR(v.J, 1.0, 1e-13);
}

TEST(ExpValue, ConstantClaimScalesTheValue) {
    const PricingOptions opts;
    const ExpValue zero =
        exp_value(nullptr, Information::full, StrategyBound{1.0}, benchmark(), benchmark_paths(), nullptr, opts);
    const ClaimSpec c = claim(ClaimKind::constant, 0.7);
    const ExpValue with =
        exp_value(&c, Information::full, StrategyBound{1.0}, benchmark(), benchmark_paths(), nullptr, opts);
    EXPECT_NEAR(with.J, std::exp(-0.7) * zero.J, 1e-9 * zero.J);
}

TEST(ExpValue, BelowBestConstantStrategy) {
    for (double k : {0.5, 2.0}) {
        const ExpValue v =
            exp_value(nullptr, Information::full, StrategyBound{k}, benchmark(), benchmark_paths(), nullptr, {});
        const auto best = oracle::grid_argmin(
            [](double phi) { return oracle::exp_constant_oracle(phi, 0.05, 0.2, -0.5, 0.1, 1.0, 1.0); }, -k, k);
        EXPECT_LE(v.J, best.value * 1.02) << "k " << k;
        EXPECT_GE(v.J, best.value * 0.95) << "k " << k;
    }
}

TEST(Hodges, ZeroClaimPricesAtZero) {
    const HodgesResult h = hodges_price(claim(ClaimKind::zero), Information::full, {0.5, 1.0, 2.0}, benchmark(),
                                        benchmark_paths(), nullptr, {});
    for (const auto& r : h.rows) {
        EXPECT_EQ(r.price, 0.0);
        EXPECT_EQ(r.J_zero, r.J_claim);
    }
}

TEST(Hodges, ConstantClaimPricesAtItsAmount) {
    const HodgesResult h = hodges_price(claim(ClaimKind::constant, 0.5), Information::full, {0.5, 1.0, 2.0},
                                        benchmark(), benchmark_paths(), nullptr, {});
    for (const auto& r : h.rows) EXPECT_NEAR(r.price, 0.5, 1e-2);
}

TEST(Hodges, CashInvariance) {
    ClaimSpec put = claim(ClaimKind::put);
    put.strike = 1.0;
    const std::vector<double> ks{1.0};
    const double base = hodges_price(put, Information::full, ks, benchmark(), benchmark_paths(), nullptr, {}).limit;
    for (double c : {-0.5, 0.5, 1.0}) {
        ClaimSpec shifted = put;
        shifted.cash = c;
        const double p = hodges_price(shifted, Information::full, ks, benchmark(), benchmark_paths(), nullptr, {}).limit;
        EXPECT_NEAR(p, base + c, 2e-2) << "cash " << c;
    }
}

TEST(Hodges, DefaultableBond) {
    const ClaimSpec bond = claim(ClaimKind::defaultable_bond);
    const HodgesResult h =
        hodges_price(bond, Information::full, {0.5, 1.0, 2.0}, benchmark(), benchmark_paths(), nullptr, {});
    for (const auto& r : h.rows) {
        EXPECT_GT(r.price, 0.0);
        EXPECT_LT(r.price, 1.0);
    }
    EXPECT_TRUE(h.claim_values_monotone);
    // Small-k brute force: with k = 0 no trading is possible, so the price is
    // the certainty equivalent -(1/gamma) ln E[exp(-gamma zeta)] with P(no default) = e^{-lambda T}.
    const HodgesResult h0 = hodges_price(bond, Information::full, {0.0}, benchmark(), benchmark_paths(), nullptr, {});
    const double survive = std::exp(-0.1);
    const double ce = -std::log(survive * std::exp(-1.0) + (1.0 - survive));
    EXPECT_NEAR(h0.limit, ce, 3.0 * h0.rows[0].se + 1e-3);

    const ModelSpec safe = constant_model(0.05, 0.2, -0.5, 0.0, 1.0);
    const PathBundle p = simulate_paths(safe, 25, 8000, 22);
    const HodgesResult riskless = hodges_price(bond, Information::full, {1.0}, safe, p, nullptr, {});
    EXPECT_NEAR(riskless.limit, 1.0, 1e-2);
}

TEST(Hodges, ClaimValuesDecreaseInK) {
    ClaimSpec put = claim(ClaimKind::put);
    put.strike = 1.1;
    const HodgesResult h =
        hodges_price(put, Information::full, {0.25, 0.5, 1.0, 2.0}, benchmark(), benchmark_paths(), nullptr, {});
    EXPECT_TRUE(h.claim_values_monotone);
    ASSERT_EQ(h.increments.size(), 3u);
}

TEST(InfoPrice, ObservableModelHasNoInformationPrice) {
    const FilterOutput f = filter_paths(benchmark(), benchmark_paths());
    const PriceReport r =
        information_price(claim(ClaimKind::defaultable_bond), {1.0, 2.0}, benchmark(), benchmark_paths(), f, {});
    for (const auto& row : r.rows) {
        EXPECT_NEAR(row.d, 0.0, 2.0 * row.d_se + 1e-12) << "k " << row.k;
        EXPECT_EQ(row.d, row.p_bar - row.p);
    }
}

TEST(InfoPrice, ZeroClaimReducesToZero) {
    const ModelSpec spec = two_regime();
    const PathBundle p = simulate_paths(spec, 25, 4000, 23);
    const FilterOutput f = filter_paths(spec, p);
    const PriceReport r = information_price(claim(ClaimKind::zero), {1.0}, spec, p, f, {});
    const InfoRow& row = r.rows[0];
    EXPECT_EQ(row.J_bar_claim, row.J_bar_zero);
    EXPECT_EQ(row.J_claim, row.J_zero);
    EXPECT_EQ(row.d, 0.0);
}

TEST(InfoPrice, IdentitiesHoldOnStoredValues) {
    const ModelSpec spec = two_regime();
    const PathBundle p = simulate_paths(spec, 25, 4000, 24);
    const FilterOutput f = filter_paths(spec, p);
    PricingOptions opts;
    opts.gamma = 2.0;
    const PriceReport r = information_price(claim(ClaimKind::defaultable_bond), {0.5, 1.0}, spec, p, f, opts);
    for (const auto& row : r.rows) {
        EXPECT_EQ(row.d, row.p_bar - row.p);
        EXPECT_NEAR(row.p_bar, std::log(row.J_bar_zero / row.J_bar_claim) / 2.0, 1e-15);
        EXPECT_NEAR(row.p, std::log(row.J_zero / row.J_claim) / 2.0, 1e-15);
        EXPECT_TRUE(std::isfinite(row.d_se));
    }
    EXPECT_EQ(r.d_limit, r.rows.back().d);
}

TEST(InfoPrice, JsonAndCsv) {
    const ModelSpec spec = two_regime();
    const PathBundle p = simulate_paths(spec, 10, 800, 25);
    const FilterOutput f = filter_paths(spec, p);
    const PriceReport r = information_price(claim(ClaimKind::put), {1.0, 2.0}, spec, p, f, {});
    const auto j = nlohmann::json::parse(price_report_json(r));
    ASSERT_EQ(j["rows"].size(), 2u);
    std::ostringstream s;
    write_price_csv(s, r);
    EXPECT_EQ(s.str().substr(0, s.str().find('\n')), "k,p_bar_k,p_bar_se,p_k,p_se,d_k,d_se");
}

TEST(Claims, ValidationAndPayoffs) {
    ClaimSpec put = claim(ClaimKind::put);
    put.asset = 3;
    EXPECT_THROW(put.validate(benchmark()), ValidationError);
    ClaimSpec bond = claim(ClaimKind::defaultable_bond);
    bond.default_index = 1;
    EXPECT_THROW(bond.validate(benchmark()), ValidationError);
    EXPECT_THROW(claim_kind_from_string("swap"), ValidationError);
    EXPECT_EQ(claim_kind_from_string("put"), ClaimKind::put);
    EXPECT_THROW(hodges_price(claim(ClaimKind::zero), Information::full, {1.0, 0.5}, benchmark(), benchmark_paths(),
                              nullptr, {}),
                 ValidationError);
    const PathBundle& p = benchmark_paths();
    for (int i = 0; i < 100; ++i) {
        const ClaimSpec b = claim(ClaimKind::defaultable_bond, 2.0, 0.25);
        EXPECT_EQ(b.payoff(p, i), p.N(i, p.steps())[0] ? 0.25 : 2.25);
        EXPECT_GE(b.payoff(p, i), b.lower_bound());
    }
}
