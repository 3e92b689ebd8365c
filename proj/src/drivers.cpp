#include "credopt/drivers.hpp"

#include <algorithm>

namespace credopt {
namespace {

void check_finite(const ScalarInputs& in) {
    const double all[] = {in.mu, in.sigma, in.beta, in.lambda, in.gamma, in.y, in.z, in.u};
    for (double v : all) {
        if (!std::isfinite(v)) throw NumericalError("non-finite driver input");
    }
}

void check_bound(const StrategyBound& bound) {
    if (!(bound.k >= 0.0) || !std::isfinite(bound.k)) throw ValidationError("bounds.k", "must be finite and >= 0");
}

// Root of a decreasing derivative on [lo, hi] by Newton steps kept inside a
// shrinking bracket; returns an endpoint when the derivative does not change sign.
template <class D1, class D2>
double concave_argmax(D1&& d1, D2&& d2, double lo, double hi) {
    if (hi <= lo) return lo;
    if (!(d1(lo) > 0.0)) return lo;
    if (!(d1(hi) < 0.0)) return hi;
    double a = lo, b = hi;
    double x = std::clamp(0.0, a, b);
    if (x == a || x == b) x = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
        const double g = d1(x);
        if (g > 0.0) {
            a = x;
        } else if (g < 0.0) {
            b = x;
        } else {
            return x;
        }
        const double h2 = d2(x);
        double next = h2 < 0.0 ? x - g / h2 : 0.5 * (a + b);
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        const double tol = 1e-15 * (1.0 + std::abs(x));
        if (std::abs(next - x) <= tol || b - a <= tol) return next;
        x = next;
    }
    return x;
}

// Dense grid plus golden-section polish; ties go to the smaller |x|.
template <class H>
double grid_argmax(H&& h, double lo, double hi) {
    if (hi <= lo) return lo;
    constexpr int kPoints = 2001;
    const double step = (hi - lo) / (kPoints - 1);
    double best_x = lo, best = h(lo);
    for (int i = 1; i < kPoints; ++i) {
        const double x = i == kPoints - 1 ? hi : lo + i * step;
        const double v = h(x);
        if (v > best || (v == best && std::abs(x) < std::abs(best_x))) {
            best = v;
            best_x = x;
        }
    }
    const double a = std::max(lo, best_x - step);
    const double b = std::min(hi, best_x + step);
    const double polished = golden_section_max([&](double x) { return h(x); }, a, b);
    return h(polished) > best ? polished : best_x;
}

}  // namespace

double power_h(double pi, const ScalarInputs& in) {
    const double g = in.gamma;
    double v = g * pi * (in.mu * in.y + in.sigma * in.z) + 0.5 * g * (g - 1.0) * pi * pi * in.sigma * in.sigma * in.y;
    if (in.lambda != 0.0 && in.beta != 0.0) {
        const double base = 1.0 + pi * in.beta;
        if (base < 0.0) return -kInf;
        v += in.lambda * (std::pow(base, g) - 1.0) * (in.y + in.u);
    }
    return v;
}

double power_h_derivative(double pi, const ScalarInputs& in) {
    const double g = in.gamma;
    double d = g * (in.mu * in.y + in.sigma * in.z) + g * (g - 1.0) * pi * in.sigma * in.sigma * in.y;
    if (in.lambda != 0.0 && in.beta != 0.0) {
        d += in.lambda * g * in.beta * std::pow(1.0 + pi * in.beta, g - 1.0) * (in.y + in.u);
    }
    return d;
}

std::pair<double, double> power_feasible(const ScalarInputs& in, const StrategyBound& bound) {
    check_bound(bound);
    double lo = -bound.k, hi = bound.k;
    if (in.lambda > 0.0 && in.beta > 0.0) lo = std::max(lo, (kJumpFloor - 1.0) / in.beta);
    if (in.lambda > 0.0 && in.beta < 0.0) hi = std::min(hi, (kJumpFloor - 1.0) / in.beta);
    if (lo > hi) throw ValidationError("bounds.k", "empty feasible strategy set");
    return {lo, hi};
}

ScalarOpt power_sup(const ScalarInputs& in, const StrategyBound& bound) {
    check_finite(in);
    const auto [lo, hi] = power_feasible(in, bound);
    const double g = in.gamma;
    const double s2 = in.sigma * in.sigma;
    const bool jumps = in.lambda != 0.0 && in.beta != 0.0;
    double arg;
    if (in.y > 0.0 && s2 > 0.0 && !jumps) {
        arg = std::clamp((in.mu * in.y + in.sigma * in.z) / ((1.0 - g) * s2 * in.y), lo, hi);
    } else if (in.y > 0.0 && in.y + in.u >= 0.0) {
        auto d2 = [&](double pi) {
            const double base = 1.0 + pi * in.beta;
            return g * (g - 1.0) * s2 * in.y +
                   in.lambda * g * (g - 1.0) * in.beta * in.beta * std::pow(base, g - 2.0) * (in.y + in.u);
        };
        arg = concave_argmax([&](double pi) { return power_h_derivative(pi, in); }, d2, lo, hi);
    } else {
        arg = grid_argmax([&](double pi) { return power_h(pi, in); }, lo, hi);
    }
    return {power_h(arg, in), arg};
}

double exp_h(double phi, const ScalarInputs& in) {
    const double g = in.gamma;
    double v = 0.5 * g * g * phi * phi * in.sigma * in.sigma * in.y - g * phi * (in.y * in.mu + in.sigma * in.z);
    if (in.lambda != 0.0 && in.beta != 0.0) v += std::expm1(-g * phi * in.beta) * in.lambda * (in.y + in.u);
    return v;
}

double exp_h_derivative(double phi, const ScalarInputs& in) {
    const double g = in.gamma;
    double d = g * g * phi * in.sigma * in.sigma * in.y - g * (in.y * in.mu + in.sigma * in.z);
    if (in.lambda != 0.0 && in.beta != 0.0) {
        d -= g * in.beta * std::exp(-g * phi * in.beta) * in.lambda * (in.y + in.u);
    }
    return d;
}

ScalarOpt exp_inf(const ScalarInputs& in, const StrategyBound& bound) {
    check_finite(in);
    check_bound(bound);
    if (!(in.gamma > 0.0)) throw ValidationError("utility.gamma", "exponential utility needs gamma > 0");
    const double lo = -bound.k, hi = bound.k;
    const double g = in.gamma;
    const double s2 = in.sigma * in.sigma;
    const bool jumps = in.lambda != 0.0 && in.beta != 0.0;
    double arg;
    if (in.y > 0.0 && s2 > 0.0 && !jumps) {
        arg = std::clamp((in.y * in.mu + in.sigma * in.z) / (g * s2 * in.y), lo, hi);
    } else if (in.y > 0.0 && in.y + in.u >= 0.0) {
        // maximize -h: its derivative is decreasing on the convex branch
        auto d1 = [&](double phi) { return -exp_h_derivative(phi, in); };
        auto d2 = [&](double phi) {
            return -(g * g * s2 * in.y +
                     g * g * in.beta * in.beta * std::exp(-g * phi * in.beta) * in.lambda * (in.y + in.u));
        };
        arg = concave_argmax(d1, d2, lo, hi);
    } else {
        arg = grid_argmax([&](double phi) { return -exp_h(phi, in); }, lo, hi);
    }
    return {exp_h(arg, in), arg};
}

// ---- vector case -------------------------------------------------------------

SmallVec project_feasible(const SmallVec& x, double k,
                          const std::vector<std::pair<SmallVec, double>>& halfspaces) {
    auto box = [k](const SmallVec& v) { return SmallVec(v.cwiseMax(-k).cwiseMin(k)); };
    if (halfspaces.empty()) return box(x);
    auto inside = [&](const SmallVec& v) {
        if ((v.array().abs() > k).any()) return false;
        for (const auto& [a, b] : halfspaces) {
            if (a.dot(v) < b) return false;
        }
        return true;
    };
    if (inside(x)) return x;
    // Dykstra's alternating projections.
    const int sets = 1 + static_cast<int>(halfspaces.size());
    std::vector<SmallVec> corr(sets, SmallVec::Zero(x.size()));
    SmallVec cur = x;
    for (int cycle = 0; cycle < 5000; ++cycle) {
        const SmallVec before = cur;
        double shift = 0.0;  // the iterate can stall while corrections still move
        for (int s = 0; s < sets; ++s) {
            const SmallVec v = cur + corr[s];
            SmallVec next;
            if (s == 0) {
                next = box(v);
            } else {
                const auto& [a, b] = halfspaces[s - 1];
                const double gap = a.dot(v) - b;
                next = gap >= 0.0 ? v : SmallVec(v - gap / a.squaredNorm() * a);
            }
            shift += (v - next - corr[s]).norm();
            corr[s] = v - next;
            cur = next;
        }
        if ((cur - before).norm() + shift <= 1e-15 * (1.0 + cur.norm())) break;
    }
    return cur;
}

namespace {

struct VectorObjective {
    std::function<double(const SmallVec&)> f;
    std::function<SmallVec(const SmallVec&)> grad;
};

SmallVec ascend(const VectorObjective& obj, const SmallVec& start, double k,
                const std::vector<std::pair<SmallVec, double>>& hs) {
    SmallVec x = project_feasible(start, k, hs);
    double fx = obj.f(x);
    double step = 1.0;
    for (int it = 0; it < 5000; ++it) {
        const SmallVec g = obj.grad(x);
        if (!g.allFinite()) break;
        double t = step;
        bool accepted = false;
        SmallVec next;
        double fn = fx;
        for (int ls = 0; ls < 80; ++ls) {
            next = project_feasible(x + t * g, k, hs);
            fn = obj.f(next);
            if (fn >= fx + 1e-4 * g.dot(next - x)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        const double move = (next - x).norm();
        x = next;
        fx = fn;
        if (move <= 1e-14 * (1.0 + x.norm())) break;
        step = std::min(2.0 * t, 1e8);
    }
    return x;
}

VectorOpt multistart_max(const VectorObjective& obj, double k, const std::vector<std::pair<SmallVec, double>>& hs,
                         int n) {
    std::vector<SmallVec> starts{SmallVec::Zero(n)};
    std::mt19937_64 rng(0x5eedc0de);
    std::bernoulli_distribution coin(0.5);
    for (int s = 0; s < 8; ++s) {
        SmallVec c(n);
        for (int a = 0; a < n; ++a) c(a) = coin(rng) ? k : -k;
        starts.push_back(c);
    }
    std::vector<SmallVec> ends;
    std::vector<double> vals;
    int best = 0;
    for (const auto& s : starts) {
        ends.push_back(ascend(obj, s, k, hs));
        vals.push_back(obj.f(ends.back()));
        const int i = static_cast<int>(ends.size()) - 1;
        if (vals[i] > vals[best] || (vals[i] == vals[best] && ends[i].norm() < ends[best].norm())) best = i;
    }
    VectorOpt out;
    for (const auto& e : ends) {
        if ((e - ends[best]).cwiseAbs().maxCoeff() <= 1e-6) ++out.agreeing_starts;
    }
    out.arg = ends[best];
    out.certified = out.agreeing_starts >= 2;
    if (!out.certified) {
        // Coarse lattice over the box, polished by the same ascent.
        const int per_dim = n <= 2 ? 41 : (n == 3 ? 21 : 11);
        SmallVec point(n), best_point = out.arg;
        double best_val = vals[best];
        std::vector<int> idx(n, 0);
        for (;;) {
            for (int a = 0; a < n; ++a) point(a) = -k + 2.0 * k * idx[a] / (per_dim - 1);
            bool feasible = true;
            for (const auto& [a, b] : hs) feasible = feasible && a.dot(point) >= b;
            if (feasible) {
                const double v = obj.f(point);
                if (v > best_val) {
                    best_val = v;
                    best_point = point;
                }
            }
            int a = 0;
            while (a < n && ++idx[a] == per_dim) idx[a++] = 0;
            if (a == n) break;
        }
        const SmallVec polished = ascend(obj, best_point, k, hs);
        out.arg = obj.f(polished) >= best_val ? polished : best_point;
    }
    out.value = obj.f(out.arg);
    return out;
}

void check_vector(const VectorInputs& in) {
    const int n = static_cast<int>(in.coeffs.mu.size());
    const int p = static_cast<int>(in.coeffs.lambda.size());
    if (n < 1 || n > kMaxDim || p < 1 || p > kMaxDim || in.z.size() != n || in.u.size() != p) {
        throw ValidationError("driver", "inconsistent vector driver dimensions");
    }
    if (!std::isfinite(in.y) || !in.z.allFinite() || !in.u.allFinite() || !in.coeffs.mu.allFinite() ||
        !in.coeffs.sigma.allFinite() || !in.coeffs.lambda.allFinite()) {
        throw NumericalError("non-finite driver input");
    }
}

}  // namespace

double power_h_vector(const SmallVec& pi, const VectorInputs& in) {
    const auto& c = in.coeffs;
    const double g = in.gamma;
    const SmallVec exposure = c.sigma.transpose() * pi;
    double v = g * (in.y * pi.dot(c.mu) + pi.dot(c.sigma * in.z)) + 0.5 * g * (g - 1.0) * exposure.squaredNorm() * in.y;
    for (int j = 0; j < c.lambda.size(); ++j) {
        if (c.lambda(j) == 0.0) continue;
        const double base = 1.0 + pi.dot(c.beta.col(j));
        if (base < 0.0) return -kInf;
        v += c.lambda(j) * (std::pow(base, g) - 1.0) * (in.y + in.u(j));
    }
    return v;
}

double exp_h_vector(const SmallVec& phi, const VectorInputs& in) {
    const auto& c = in.coeffs;
    const double g = in.gamma;
    const SmallVec exposure = c.sigma.transpose() * phi;
    double v = 0.5 * g * g * exposure.squaredNorm() * in.y - g * (in.y * phi.dot(c.mu) + phi.dot(c.sigma * in.z));
    for (int j = 0; j < c.lambda.size(); ++j) {
        if (c.lambda(j) == 0.0) continue;
        v += std::expm1(-g * phi.dot(c.beta.col(j))) * c.lambda(j) * (in.y + in.u(j));
    }
    return v;
}

VectorOpt power_sup_vector(const VectorInputs& in, const StrategyBound& bound) {
    check_vector(in);
    check_bound(bound);
    const auto& c = in.coeffs;
    const int n = static_cast<int>(c.mu.size());
    const double g = in.gamma;
    std::vector<std::pair<SmallVec, double>> hs;
    for (int j = 0; j < c.lambda.size(); ++j) {
        if (c.lambda(j) > 0.0 && c.beta.col(j).squaredNorm() > 0.0) {
            hs.emplace_back(SmallVec(c.beta.col(j)), kJumpFloor - 1.0);
        }
    }
    VectorObjective obj;
    obj.f = [&](const SmallVec& pi) { return power_h_vector(pi, in); };
    obj.grad = [&](const SmallVec& pi) {
        const SmallMat cov = c.sigma * c.sigma.transpose();
        SmallVec d = g * (in.y * c.mu + c.sigma * in.z) + g * (g - 1.0) * in.y * (cov * pi);
        for (int j = 0; j < c.lambda.size(); ++j) {
            if (c.lambda(j) == 0.0) continue;
            const double base = 1.0 + pi.dot(c.beta.col(j));
            d += c.lambda(j) * g * std::pow(base, g - 1.0) * (in.y + in.u(j)) * c.beta.col(j);
        }
        return d;
    };
    return multistart_max(obj, bound.k, hs, n);
}

VectorOpt exp_inf_vector(const VectorInputs& in, const StrategyBound& bound) {
    check_vector(in);
    check_bound(bound);
    const auto& c = in.coeffs;
    const int n = static_cast<int>(c.mu.size());
    const double g = in.gamma;
    VectorObjective obj;
    obj.f = [&](const SmallVec& phi) { return -exp_h_vector(phi, in); };
    obj.grad = [&](const SmallVec& phi) {
        const SmallMat cov = c.sigma * c.sigma.transpose();
        SmallVec d = -(g * g * in.y * (cov * phi) - g * (in.y * c.mu + c.sigma * in.z));
        for (int j = 0; j < c.lambda.size(); ++j) {
            if (c.lambda(j) == 0.0) continue;
            d += g * std::exp(-g * phi.dot(c.beta.col(j))) * c.lambda(j) * (in.y + in.u(j)) * c.beta.col(j);
        }
        return d;
    };
    VectorOpt out = multistart_max(obj, bound.k, {}, n);
    out.value = -out.value;
    return out;
}

// ---- generators ----------------------------------------------------------------

double power_value_bound(const ModelSpec& spec, double gamma, double k) {
    const int n = spec.n_assets;
    const int p = spec.n_defaults;
    const double beta_cols = spec.beta.cwiseAbs().colwise().sum().maxCoeff();
    const double mu_sum = n * spec.mu_sup();
    const double sigma_col = n * spec.sigma_sup();
    const double quad = n * sigma_col * sigma_col;
    return std::pow(1.0 + k * beta_cols, gamma * p) *
           std::exp((gamma * k * mu_sum + 0.5 * gamma * gamma * k * k * quad) * spec.horizon);
}

namespace {

ScalarInputs scalar_inputs(const DriverInput& in, double gamma) {
    return ScalarInputs{in.coeffs.mu(0), in.coeffs.sigma(0, 0), in.coeffs.beta(0, 0), in.coeffs.lambda(0),
                        gamma, in.y, in.z(0), in.u(0)};
}

VectorInputs vector_inputs(const DriverInput& in, double gamma) {
    return VectorInputs{in.coeffs, gamma, in.y, in.z, in.u};
}

}  // namespace

GeneratorSpec power_generator(const ModelSpec& spec, double gamma, const StrategyBound& bound) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("utility.gamma", "power utility needs gamma in (0, 1)");
    check_bound(bound);
    const int n = spec.n_assets;
    const int p = spec.n_defaults;
    const bool scalar = n == 1 && p == 1;
    GeneratorSpec gen;
    gen.terminal = [](std::size_t) { return 1.0; };
    gen.upper_bound = power_value_bound(spec, gamma, bound.k);
    gen.driver = [gamma, bound, scalar](const DriverInput& in) {
        if (scalar) {
            const ScalarOpt r = power_sup(scalar_inputs(in, gamma), bound);
            return DriverOutput{r.value, SmallVec::Constant(1, r.arg)};
        }
        const VectorOpt r = power_sup_vector(vector_inputs(in, gamma), bound);
        return DriverOutput{r.value, r.arg};
    };

    const double k = bound.k;
    const double B = spec.beta.cwiseAbs().colwise().sum().maxCoeff();
    const double J = std::max(std::pow(1.0 + k * B, gamma) - 1.0, 1.0);
    const double lam = spec.lambda_sup();
    const double exposure = k * n * spec.sigma_sup() * std::sqrt(static_cast<double>(n));
    const double a = gamma * k * n * spec.mu_sup() + 0.5 * gamma * (1.0 - gamma) * exposure * exposure + p * lam * J;
    const double b = gamma * exposure;
    const double c = lam * J * std::sqrt(static_cast<double>(p));
    gen.lipschitz_bound = std::sqrt(a * a + b * b + c * c);
    return gen;
}

GeneratorSpec exp_generator(const ModelSpec& spec, double gamma, const StrategyBound& bound,
                            std::function<double(std::size_t)> claim, double claim_lower_bound) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("utility.gamma", "exponential utility needs gamma > 0");
    check_bound(bound);
    if (!std::isfinite(std::exp(-gamma * claim_lower_bound))) {
        throw ValidationError("utility.claim", "gamma times the claim lower bound overflows the terminal value");
    }
    const int n = spec.n_assets;
    const int p = spec.n_defaults;
    const bool scalar = n == 1 && p == 1;
    GeneratorSpec gen;
    gen.terminal = [gamma, claim = std::move(claim)](std::size_t path) { return std::exp(-gamma * claim(path)); };
    gen.upper_bound = std::exp(-gamma * claim_lower_bound);
    gen.driver = [gamma, bound, scalar](const DriverInput& in) {
        if (scalar) {
            const ScalarOpt r = exp_inf(scalar_inputs(in, gamma), bound);
            return DriverOutput{r.value, SmallVec::Constant(1, r.arg)};
        }
        const VectorOpt r = exp_inf_vector(vector_inputs(in, gamma), bound);
        return DriverOutput{r.value, r.arg};
    };

    const double k = bound.k;
    const double B = spec.beta.cwiseAbs().colwise().sum().maxCoeff();
    const double E = std::expm1(gamma * k * B);
    const double lam = spec.lambda_sup();
    const double exposure = k * n * spec.sigma_sup() * std::sqrt(static_cast<double>(n));
    const double a = 0.5 * gamma * gamma * exposure * exposure + gamma * k * n * spec.mu_sup() + p * lam * E;
    const double b = gamma * exposure;
    const double c = lam * E * std::sqrt(static_cast<double>(p));
    gen.lipschitz_bound = std::sqrt(a * a + b * b + c * c);
    return gen;
}

KLimitReport k_limit(const std::vector<KPoint>& values, bool increasing) {
    if (values.size() < 3) throw ValidationError("bounds.k", "need at least 3 values of k");
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (!(values[i].k > values[i - 1].k)) throw ValidationError("bounds.k", "k values must be increasing");
    }
    KLimitReport r;
    r.limit = values.back().value;
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double inc = values[i].value - values[i - 1].value;
        r.increments.push_back(inc);
        const double tol = 2.0 * std::max(values[i].se, values[i - 1].se);
        const double wrong_way = increasing ? -inc : inc;
        if (wrong_way > tol) {
            r.monotone = false;
            r.violations.push_back(static_cast<int>(i - 1));
        }
        if (i >= 2 && std::abs(inc) > std::abs(r.increments[i - 2]) + tol) r.shrinking = false;
    }
    return r;
}

}  // namespace credopt
