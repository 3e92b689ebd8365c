#include "oracle_testkit/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace oracle {
namespace {

double golden_max(const std::function<double(double)>& f, double a, double b, double tol) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return fc >= fd ? c : d;
}

McEstimate summarize(const std::vector<double>& v) {
    // Welford running moments.
    double mean = 0.0, m2 = 0.0;
    long n = 0;
    for (double x : v) {
        ++n;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    return {mean, std::sqrt(m2 / (n - 1) / n)};
}

}  // namespace

double power_constant_oracle(double pi, double mu, double sigma, double beta, double lambda, double gamma, double T) {
    if (1.0 + pi * beta < 0.0) throw std::domain_error("1 + pi beta < 0");
    const double survive = std::exp(-lambda * T);
    return std::exp((gamma * pi * mu + 0.5 * gamma * (gamma - 1.0) * pi * pi * sigma * sigma) * T) *
           (survive + (1.0 - survive) * std::pow(1.0 + pi * beta, gamma));
}

double exp_constant_oracle(double phi, double mu, double sigma, double beta, double lambda, double gamma, double T) {
    const double survive = std::exp(-lambda * T);
    return std::exp((-gamma * phi * mu + 0.5 * gamma * gamma * phi * phi * sigma * sigma) * T) *
           (survive + (1.0 - survive) * std::exp(-gamma * phi * beta));
}

GridOpt grid_argopt(const std::function<double(double)>& objective, double lo, double hi, double tol) {
    constexpr int kPoints = 100000;
    const double h = (hi - lo) / (kPoints - 1);
    int best = 0;
    double best_v = objective(lo);
    for (int i = 1; i < kPoints; ++i) {
        const double v = objective(lo + i * h);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    const double a = std::max(lo, lo + (best - 1) * h);
    const double b = std::min(hi, lo + (best + 1) * h);
    const double x = golden_max(objective, a, b, tol);
    const double grid_x = lo + best * h;
    if (objective(x) >= best_v) return {x, objective(x)};
    return {grid_x, best_v};
}

GridOpt grid_argmin(const std::function<double(double)>& objective, double lo, double hi, double tol) {
    GridOpt r = grid_argopt([&](double x) { return -objective(x); }, lo, hi, tol);
    r.value = -r.value;
    return r;
}

GridOpt2 lattice_argmax2(const std::function<double(double, double)>& objective, double lo, double hi, int points,
                         double tol) {
    const double h = (hi - lo) / (points - 1);
    GridOpt2 best{lo, lo, -std::numeric_limits<double>::infinity()};
    for (int i = 0; i < points; ++i) {
        for (int j = 0; j < points; ++j) {
            const double x = lo + i * h, y = lo + j * h;
            const double v = objective(x, y);
            if (v > best.value) best = {x, y, v};
        }
    }
    // Alternating golden-section polish inside the lattice neighbourhood.
    double ax = std::max(lo, best.x - h), bx = std::min(hi, best.x + h);
    double ay = std::max(lo, best.y - h), by = std::min(hi, best.y + h);
    for (int sweep = 0; sweep < 200; ++sweep) {
        const double px = best.x, py = best.y;
        const double nx = golden_max([&](double x) { return objective(x, best.y); }, ax, bx, tol);
        if (objective(nx, best.y) >= best.value) best = {nx, best.y, objective(nx, best.y)};
        const double ny = golden_max([&](double y) { return objective(best.x, y); }, ay, by, tol);
        if (objective(best.x, ny) >= best.value) best = {best.x, ny, objective(best.x, ny)};
        if (std::abs(best.x - px) + std::abs(best.y - py) < tol) break;
    }
    return best;
}

McEstimate forward_power_mc(double pi, double mu, double sigma, double beta, double lambda, double gamma, double T,
                            long paths, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> v(paths);
    const double p_default = 1.0 - std::exp(-lambda * T);
    for (long i = 0; i < paths; ++i) {
        const double w = std::sqrt(T) * normal(rng);
        const bool defaulted = unif(rng) < p_default;
        double x = std::exp((pi * mu - 0.5 * pi * pi * sigma * sigma) * T + pi * sigma * w);
        if (defaulted) x *= 1.0 + pi * beta;
        v[i] = std::pow(x, gamma);
    }
    return summarize(v);
}

McEstimate forward_exp_mc(double phi, double mu, double sigma, double beta, double lambda, double gamma, double T,
                          long paths, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> v(paths);
    const double p_default = 1.0 - std::exp(-lambda * T);
    for (long i = 0; i < paths; ++i) {
        const double w = std::sqrt(T) * normal(rng);
        const bool defaulted = unif(rng) < p_default;
        const double x = phi * (mu * T + sigma * w + (defaulted ? beta : 0.0));
        v[i] = std::exp(-gamma * x);
    }
    return summarize(v);
}

std::vector<double> particle_filter_mu(const PfModel& model, const std::vector<double>& log_prices,
                                       const std::vector<int>& defaults, double dt, int particles,
                                       std::uint64_t seed) {
    const int R = static_cast<int>(model.mu.size());
    const int points = static_cast<int>(log_prices.size());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto categorical = [&](const std::vector<double>& w, double total) {
        double u = unif(rng) * total;
        for (int k = 0; k < static_cast<int>(w.size()); ++k) {
            if (u < w[k]) return k;
            u -= w[k];
        }
        return static_cast<int>(w.size()) - 1;
    };
    auto evolve = [&](int state, double horizon) {
        double t = 0.0;
        for (;;) {
            const double rate = -model.q[state][state];
            if (rate <= 0.0) return state;
            t += -std::log(1.0 - unif(rng)) / rate;
            if (t > horizon) return state;
            std::vector<double> w(R);
            for (int k = 0; k < R; ++k) w[k] = k == state ? 0.0 : model.q[state][k];
            state = categorical(w, rate);
        }
    };

    std::vector<int> state(particles);
    for (auto& s : state) s = categorical(model.initial, 1.0);
    std::vector<double> out(points);
    std::vector<double> logw(particles), w(particles);
    std::vector<int> next(particles);
    const double s2 = model.sigma * model.sigma;
    for (int i = 0; i < points; ++i) {
        double m = 0.0;
        for (int s : state) m += model.mu[s];
        out[i] = m / particles;
        if (i + 1 == points) break;

        const bool alive = defaults[i] == 0;
        const bool jump = defaults[i + 1] > defaults[i];
        double y = log_prices[i + 1] - log_prices[i];
        if (jump) y -= std::log(1.0 + model.beta);
        double top = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < particles; ++k) {
            const int r = state[k];
            const double mean = (model.mu[r] - 0.5 * s2) * dt;
            double lw = -(y - mean) * (y - mean) / (2.0 * s2 * dt);
            if (alive) {
                const double q = 1.0 - std::exp(-model.lambda[r] * dt);
                lw += jump ? std::log(q) : std::log(1.0 - q);
            }
            logw[k] = lw;
            top = std::max(top, lw);
        }
        double total = 0.0;
        for (int k = 0; k < particles; ++k) {
            w[k] = std::isfinite(top) ? std::exp(logw[k] - top) : 1.0;
            total += w[k];
        }
        // systematic resampling
        const double stride = total / particles;
        double u = unif(rng) * stride, acc = w[0];
        int j = 0;
        for (int k = 0; k < particles; ++k) {
            while (u > acc && j < particles - 1) acc += w[++j];
            next[k] = state[j];
            u += stride;
        }
        for (int k = 0; k < particles; ++k) state[k] = evolve(next[k], dt);
    }
    return out;
}

}  // namespace oracle
