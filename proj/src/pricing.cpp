#include "credopt/pricing.hpp"

#include "credopt/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <ostream>

namespace credopt {

double ClaimSpec::payoff(const PathBundle& paths, std::size_t path) const {
    const int T = paths.steps();
    switch (kind) {
        case ClaimKind::zero:
            return cash;
        case ClaimKind::constant:
            return amount + cash;
        case ClaimKind::defaultable_bond:
            return amount * (paths.N(path, T)[default_index] ? 0.0 : 1.0) + cash;
        case ClaimKind::put:
            return amount * std::max(strike - paths.S(path, T)[asset], 0.0) + cash;
    }
    return cash;
}

double ClaimSpec::lower_bound() const {
    switch (kind) {
        case ClaimKind::zero:
            return cash;
        case ClaimKind::constant:
            return amount + cash;
        case ClaimKind::defaultable_bond:
        case ClaimKind::put:
            return std::min(0.0, amount) * (kind == ClaimKind::put ? std::max(strike, 0.0) : 1.0) + cash;
    }
    return cash;
}

std::string ClaimSpec::name() const {
    switch (kind) {
        case ClaimKind::zero:
            return "zero";
        case ClaimKind::constant:
            return "constant";
        case ClaimKind::defaultable_bond:
            return "defaultable_bond";
        case ClaimKind::put:
            return "put";
    }
    return "zero";
}

void ClaimSpec::validate(const ModelSpec& spec) const {
    if (!std::isfinite(amount) || !std::isfinite(strike) || !std::isfinite(cash)) {
        throw ValidationError("utility.claim", "parameters must be finite");
    }
    if (kind == ClaimKind::put && (asset < 0 || asset >= spec.n_assets)) {
        throw ValidationError("utility.claim.asset", "asset index out of range");
    }
    if (kind == ClaimKind::defaultable_bond && (default_index < 0 || default_index >= spec.n_defaults)) {
        throw ValidationError("utility.claim.default_index", "default index out of range");
    }
}

ClaimKind claim_kind_from_string(const std::string& id) {
    if (id == "zero") return ClaimKind::zero;
    if (id == "constant") return ClaimKind::constant;
    if (id == "defaultable_bond") return ClaimKind::defaultable_bond;
    if (id == "put") return ClaimKind::put;
    throw ValidationError("utility.claim.id", "unknown claim '" + id + "' (zero, constant, defaultable_bond, put)");
}

namespace {

int effective_batches(const PathBundle& paths, const PricingOptions& opts) {
    if (opts.batches < 1) throw ValidationError("numerics.batches", "must be >= 1");
    if (paths.n_paths < opts.batches) {
        throw ValidationError("numerics.paths", "need at least one path per batch");
    }
    return opts.batches;
}

double batch_se(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return estimate_mean(v).se;
}

}  // namespace

ExpValue exp_value(const ClaimSpec* claim, Information info, const StrategyBound& bound, const ModelSpec& spec,
                   const PathBundle& paths, const FilterOutput* filter, const PricingOptions& opts) {
    if (claim) claim->validate(spec);
    const int B = effective_batches(paths, opts);
    const BsdeProblem problem(spec, paths, info, filter);
    std::function<double(std::size_t)> payoff = [](std::size_t) { return 0.0; };
    double lower = 0.0;
    if (claim) {
        payoff = [claim, &paths](std::size_t path) { return claim->payoff(paths, path); };
        lower = claim->lower_bound();
    }
    const GeneratorSpec gen = exp_generator(spec, opts.gamma, bound, payoff, lower);
    ExpValue out;
    const int np = paths.n_paths;
    for (int b = 0; b < B; ++b) {
        const std::size_t first = static_cast<std::size_t>(np) * b / B;
        const std::size_t last = static_cast<std::size_t>(np) * (b + 1) / B;
        const BsdeSolution sol = solve_bsde(gen, problem.slice(first, static_cast<int>(last - first)), opts.basis);
        if (!(sol.Y0 > 0.0)) throw NumericalError("non-positive exponential value J(0)", -1, 0);
        out.batch_values.push_back(sol.Y0);
    }
    out.J = pairwise_sum(out.batch_values) / B;
    out.se = batch_se(out.batch_values);
    return out;
}

namespace {

struct PriceSamples {
    HodgesRow row;
    std::vector<double> batch_prices;
};

PriceSamples price_at(const ClaimSpec& claim, Information info, double k, const ModelSpec& spec,
                      const PathBundle& paths, const FilterOutput* filter, const PricingOptions& opts) {
    const StrategyBound bound{k};
    const ExpValue zero = exp_value(nullptr, info, bound, spec, paths, filter, opts);
    // A claim that is identically zero is the zero run itself.
    const bool trivial = claim.kind == ClaimKind::zero && claim.cash == 0.0;
    const ExpValue with = trivial ? zero : exp_value(&claim, info, bound, spec, paths, filter, opts);
    PriceSamples s;
    s.row.k = k;
    s.row.J_zero = zero.J;
    s.row.J_claim = with.J;
    s.row.J_zero_se = zero.se;
    s.row.J_claim_se = with.se;
    s.row.price = std::log(zero.J / with.J) / opts.gamma;
    for (std::size_t b = 0; b < zero.batch_values.size(); ++b) {
        s.batch_prices.push_back(std::log(zero.batch_values[b] / with.batch_values[b]) / opts.gamma);
    }
    s.row.se = batch_se(s.batch_prices);
    return s;
}

std::vector<double> increments(const std::vector<double>& v) {
    std::vector<double> out;
    for (std::size_t i = 1; i < v.size(); ++i) out.push_back(v[i] - v[i - 1]);
    return out;
}

void check_ks(const std::vector<double>& ks) {
    if (ks.empty()) throw ValidationError("bounds.k", "need at least one k");
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (!(ks[i] >= 0.0) || !std::isfinite(ks[i])) throw ValidationError("bounds.k", "k must be finite and >= 0");
        if (i > 0 && !(ks[i] > ks[i - 1])) throw ValidationError("bounds.k", "k values must be increasing");
    }
}

}  // namespace

HodgesResult hodges_price(const ClaimSpec& claim, Information info, const std::vector<double>& ks,
                          const ModelSpec& spec, const PathBundle& paths, const FilterOutput* filter,
                          const PricingOptions& opts) {
    check_ks(ks);
    HodgesResult h;
    h.info = info;
    std::vector<double> prices;
    for (double k : ks) {
        h.rows.push_back(price_at(claim, info, k, spec, paths, filter, opts).row);
        prices.push_back(h.rows.back().price);
    }
    h.limit = prices.back();
    h.increments = increments(prices);
    for (std::size_t i = 1; i < h.rows.size(); ++i) {
        const double tol = 2.0 * std::max(h.rows[i].J_claim_se, h.rows[i - 1].J_claim_se);
        if (h.rows[i].J_claim - h.rows[i - 1].J_claim > (std::isnan(tol) ? 0.0 : tol)) h.claim_values_monotone = false;
    }
    return h;
}

PriceReport information_price(const ClaimSpec& claim, const std::vector<double>& ks, const ModelSpec& spec,
                              const PathBundle& paths, const FilterOutput& filter, const PricingOptions& opts) {
    check_ks(ks);
    PriceReport r;
    r.gamma = opts.gamma;
    r.claim = claim.name();
    r.paths = paths.n_paths;
    r.steps = paths.steps();
    r.seed = paths.seed;
    r.batches = opts.batches;
    r.has_full = r.has_partial = true;
    std::vector<double> pb, pf, d;
    for (double k : ks) {
        const PriceSamples partial = price_at(claim, Information::partial, k, spec, paths, &filter, opts);
        const PriceSamples full = price_at(claim, Information::full, k, spec, paths, &filter, opts);
        InfoRow row;
        row.k = k;
        row.J_bar_zero = partial.row.J_zero;
        row.J_bar_claim = partial.row.J_claim;
        row.J_zero = full.row.J_zero;
        row.J_claim = full.row.J_claim;
        row.p_bar = partial.row.price;
        row.p_bar_se = partial.row.se;
        row.p = full.row.price;
        row.p_se = full.row.se;
        row.d = row.p_bar - row.p;
        std::vector<double> db;
        for (std::size_t b = 0; b < partial.batch_prices.size(); ++b) {
            db.push_back(partial.batch_prices[b] - full.batch_prices[b]);
        }
        row.d_se = batch_se(db);
        r.rows.push_back(row);
        pb.push_back(row.p_bar);
        pf.push_back(row.p);
        d.push_back(row.d);
    }
    r.p_bar_limit = pb.back();
    r.p_limit = pf.back();
    r.d_limit = d.back();
    r.p_bar_increments = increments(pb);
    r.p_increments = increments(pf);
    r.d_increments = increments(d);
    return r;
}

PriceReport price_report(const ClaimSpec& claim, const HodgesResult& h, const PathBundle& paths,
                         const PricingOptions& opts) {
    PriceReport r;
    r.gamma = opts.gamma;
    r.claim = claim.name();
    r.paths = paths.n_paths;
    r.steps = paths.steps();
    r.seed = paths.seed;
    r.batches = opts.batches;
    const bool partial = h.info == Information::partial;
    r.has_partial = partial;
    r.has_full = !partial;
    for (const auto& hr : h.rows) {
        InfoRow row;
        row.k = hr.k;
        if (partial) {
            row.J_bar_zero = hr.J_zero;
            row.J_bar_claim = hr.J_claim;
            row.p_bar = hr.price;
            row.p_bar_se = hr.se;
        } else {
            row.J_zero = hr.J_zero;
            row.J_claim = hr.J_claim;
            row.p = hr.price;
            row.p_se = hr.se;
        }
        r.rows.push_back(row);
    }
    (partial ? r.p_bar_limit : r.p_limit) = h.limit;
    (partial ? r.p_bar_increments : r.p_increments) = h.increments;
    return r;
}

std::string price_report_json(const PriceReport& r) {
    nlohmann::ordered_json j;
    j["gamma"] = r.gamma;
    j["claim"] = r.claim;
    j["paths"] = r.paths;
    j["steps"] = r.steps;
    j["seed"] = r.seed;
    j["batches"] = r.batches;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : r.rows) {
        nlohmann::ordered_json o;
        o["k"] = row.k;
        if (r.has_partial) {
            o["J_bar_zero"] = row.J_bar_zero;
            o["J_bar_claim"] = row.J_bar_claim;
            o["p_bar"] = row.p_bar;
            o["p_bar_se"] = row.p_bar_se;
        }
        if (r.has_full) {
            o["J_zero"] = row.J_zero;
            o["J_claim"] = row.J_claim;
            o["p"] = row.p;
            o["p_se"] = row.p_se;
        }
        if (r.has_full && r.has_partial) {
            o["d"] = row.d;
            o["d_se"] = row.d_se;
        }
        rows.push_back(o);
    }
    j["rows"] = rows;
    nlohmann::ordered_json lim;
    if (r.has_partial) {
        lim["p_bar"] = r.p_bar_limit;
        lim["p_bar_increments"] = r.p_bar_increments;
    }
    if (r.has_full) {
        lim["p"] = r.p_limit;
        lim["p_increments"] = r.p_increments;
    }
    if (r.has_full && r.has_partial) {
        lim["d"] = r.d_limit;
        lim["d_increments"] = r.d_increments;
    }
    j["limit"] = lim;
    return j.dump(2) + "\n";
}

void write_price_csv(std::ostream& out, const PriceReport& r) {
    CsvWriter csv(out);
    csv.header({"k", "p_bar_k", "p_bar_se", "p_k", "p_se", "d_k", "d_se"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& row : r.rows) {
        const bool both = r.has_full && r.has_partial;
        csv << row.k << (r.has_partial ? row.p_bar : nan) << (r.has_partial ? row.p_bar_se : nan)
            << (r.has_full ? row.p : nan) << (r.has_full ? row.p_se : nan) << (both ? row.d : nan)
            << (both ? row.d_se : nan);
        csv.end_row();
    }
}

}  // namespace credopt
