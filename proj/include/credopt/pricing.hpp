#pragma once

#include "credopt/drivers.hpp"

#include <string>

namespace credopt {

enum class ClaimKind { zero, constant, defaultable_bond, put };

/// Terminal liability from a fixed catalog, plus an optional cash shift:
///   zero: 0; constant: amount; defaultable_bond: amount * 1{tau_j > T};
///   put: amount * max(strike - S_T[asset], 0).
struct ClaimSpec {
    ClaimKind kind = ClaimKind::zero;
    double amount = 1.0;
    double strike = 1.0;
    int asset = 0;
    int default_index = 0;
    double cash = 0.0;  // added to every payoff

    double payoff(const PathBundle& paths, std::size_t path) const;
    double lower_bound() const;
    std::string name() const;
    void validate(const ModelSpec& spec) const;
};

ClaimKind claim_kind_from_string(const std::string& id);

struct PricingOptions {
    double gamma = 1.0;
    BasisSpec basis;
    /// Paths are split into this many contiguous batches; estimates are batch
    /// means and standard errors come from the spread between batches.
    int batches = 8;
};

struct ExpValue {
    double J = 0.0;
    double se = 0.0;
    std::vector<double> batch_values;
};

/// J(0) of the k-bounded exponential problem with terminal exp(-gamma claim),
/// under full information (W, M, mu, lambda) or partial information
/// (W-bar, M-bar, filtered mu and lambda). `claim == nullptr` means no claim.
ExpValue exp_value(const ClaimSpec* claim, Information info, const StrategyBound& bound, const ModelSpec& spec,
                   const PathBundle& paths, const FilterOutput* filter, const PricingOptions& opts);

struct HodgesRow {
    double k = 0.0;
    double J_zero = 0.0;
    double J_claim = 0.0;
    double price = 0.0;  // (1/gamma) ln(J_zero / J_claim)
    double se = 0.0;
    double J_zero_se = 0.0;
    double J_claim_se = 0.0;
};

struct HodgesResult {
    Information info = Information::full;
    std::vector<HodgesRow> rows;
    double limit = 0.0;             // price at the largest k
    std::vector<double> increments; // price differences between consecutive k
    bool claim_values_monotone = true;  // J_claim nonincreasing in k within 2 SE
};

/// Buying indifference price for each k. The zero-claim and claim runs share
/// the paths; a zero claim reuses the zero run, so its price is exactly 0.
HodgesResult hodges_price(const ClaimSpec& claim, Information info, const std::vector<double>& ks,
                          const ModelSpec& spec, const PathBundle& paths, const FilterOutput* filter,
                          const PricingOptions& opts);

struct InfoRow {
    double k = 0.0;
    double J_bar_zero = 0.0, J_bar_claim = 0.0;  // partial information
    double J_zero = 0.0, J_claim = 0.0;          // full information
    double p_bar = 0.0, p_bar_se = 0.0;
    double p = 0.0, p_se = 0.0;
    double d = 0.0, d_se = 0.0;                  // d = p_bar - p
};

struct PriceReport {
    double gamma = 1.0;
    std::string claim;
    int paths = 0;
    int steps = 0;
    std::uint64_t seed = 0;
    int batches = 0;
    bool has_full = false;     // p and d columns present
    bool has_partial = false;  // p_bar column present
    std::vector<InfoRow> rows;
    double p_bar_limit = 0.0, p_limit = 0.0, d_limit = 0.0;
    std::vector<double> p_bar_increments, p_increments, d_increments;
};

/// Partial- and full-information prices on identical observation paths and k
/// grid, and the information price d^k = p_bar^k - p^k.
PriceReport information_price(const ClaimSpec& claim, const std::vector<double>& ks, const ModelSpec& spec,
                              const PathBundle& paths, const FilterOutput& filter, const PricingOptions& opts);

/// Report holding only one information level (from hodges_price).
PriceReport price_report(const ClaimSpec& claim, const HodgesResult& h, const PathBundle& paths,
                         const PricingOptions& opts);

/// JSON document and flat CSV (k, p_bar_k, p_k, d_k and standard errors).
std::string price_report_json(const PriceReport& r);
void write_price_csv(std::ostream& out, const PriceReport& r);

}  // namespace credopt
