#include "credopt/bsde.hpp"

#include "credopt/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace credopt {

BsdeProblem::BsdeProblem(const ModelSpec& spec, const PathBundle& paths, Information info,
                         const FilterOutput* filter)
    : spec_(&spec), paths_(&paths), filter_(filter), info_(info), count_(paths.n_paths) {
    if (paths.n_assets != spec.n_assets || paths.n_defaults != spec.n_defaults) {
        throw ValidationError("paths", "dimensions do not match the model");
    }
    if (info == Information::partial) {
        if (!filter) throw ValidationError("filter", "partial information needs a filter output");
        if (filter->n_paths != paths.n_paths || filter->n_steps != paths.steps()) {
            throw ValidationError("filter", "filter output does not belong to these paths");
        }
    }
}

BsdeProblem BsdeProblem::slice(std::size_t first, int count) const {
    if (count < 1 || first + count > static_cast<std::size_t>(count_)) {
        throw ValidationError("slice", "path range outside the problem");
    }
    BsdeProblem out = *this;
    out.first_ = first_ + first;
    out.count_ = count;
    return out;
}

LocalCoefficients BsdeProblem::coefficients(std::size_t local, int step) const {
    const std::size_t path = global(local);
    LocalCoefficients c = paths_->coefficients(*spec_, path, step);
    if (info_ == Information::partial) {
        const auto mu = filter_->mu(path, step);
        const auto lambda = filter_->lambda(path, step);
        for (int k = 0; k < n_assets(); ++k) c.mu(k) = mu[k];
        for (int j = 0; j < n_defaults(); ++j) c.lambda(j) = lambda[j];
    }
    return c;
}

SmallVec BsdeProblem::dW(std::size_t local, int step) const {
    const std::size_t path = global(local);
    SmallVec out(n_assets());
    if (info_ == Information::full) {
        const auto w = paths_->dW(path, step);
        for (int k = 0; k < n_assets(); ++k) out(k) = w[k];
    } else {
        const auto a = filter_->W_bar(path, step);
        const auto b = filter_->W_bar(path, step + 1);
        for (int k = 0; k < n_assets(); ++k) out(k) = b[k] - a[k];
    }
    return out;
}

SmallVec BsdeProblem::dM(std::size_t local, int step) const {
    const std::size_t path = global(local);
    SmallVec out(n_defaults());
    if (info_ == Information::partial) {
        const auto a = filter_->M_bar(path, step);
        const auto b = filter_->M_bar(path, step + 1);
        for (int j = 0; j < n_defaults(); ++j) out(j) = b[j] - a[j];
        return out;
    }
    // Same cell compensator as the filtered martingale: the crossing probability
    // under the left-point intensity. The two information sets then coincide
    // when the regime is trivial.
    const auto N0 = paths_->N(path, step);
    const auto N1 = paths_->N(path, step + 1);
    const SmallVec lambda = paths_->coefficients(*spec_, path, step).lambda;
    const double dt = paths_->grid.dt();
    for (int j = 0; j < n_defaults(); ++j) {
        out(j) = static_cast<double>(N1[j] - N0[j]) - (N0[j] ? 0.0 : -std::expm1(-lambda(j) * dt));
    }
    return out;
}

StrategyContext BsdeProblem::context(std::size_t local, int step) const {
    StrategyContext ctx = strategy_context(*paths_, global(local), step);
    if (info_ == Information::partial) ctx.regime = -1;  // not observable
    return ctx;
}

int BsdeProblem::key(std::size_t local, int point) const {
    const std::size_t path = global(local);
    const auto N = paths_->N(path, point);
    int k = 0;
    for (int j = 0; j < n_defaults(); ++j) k |= (N[j] ? 1 : 0) << j;
    if (info_ == Information::full && paths_->has_regime) k += paths_->regime(path, point) << n_defaults();
    return k;
}

int BsdeProblem::n_features() const {
    int f = n_assets();
    if (info_ == Information::partial) f += filter_->n_regimes - 1;
    return f;
}

void BsdeProblem::features(std::size_t local, int point, double* out) const {
    const std::size_t path = global(local);
    const auto S = paths_->S(path, point);
    int at = 0;
    for (int k = 0; k < n_assets(); ++k) out[at++] = std::log(S[k]);
    if (info_ == Information::partial) {
        const auto post = filter_->pi(path, point);
        for (int r = 1; r < filter_->n_regimes; ++r) out[at++] = post[r];
    }
}

const GroupModel* StepModel::find(int key) const {
    auto it = std::lower_bound(groups.begin(), groups.end(), key,
                               [](const GroupModel& g, int k) { return g.key < k; });
    return it != groups.end() && it->key == key ? &*it : nullptr;
}

namespace {

int basis_size(int f, int degree) {
    if (degree <= 0) return 1;
    if (degree == 1) return 1 + f;
    return 1 + f + f * (f + 1) / 2;
}

// 1, z_a, z_a z_b (a <= b), truncated at the requested total degree.
void basis_row(const double* z, int f, int degree, double* out) {
    int at = 0;
    out[at++] = 1.0;
    if (degree >= 1) {
        for (int a = 0; a < f; ++a) out[at++] = z[a];
    }
    if (degree >= 2) {
        for (int a = 0; a < f; ++a) {
            for (int b = a; b < f; ++b) out[at++] = z[a] * z[b];
        }
    }
}

void standardized(const GroupModel& g, const double* raw, double* z) {
    for (std::size_t a = 0; a < g.features.size(); ++a) z[a] = (raw[g.features[a]] - g.mean(a)) / g.scale(a);
}

struct GroupFit {
    GroupModel model;
    double condition = 1.0;
    double residual = 0.0;
};

// Ridge-regularized normal equations, followed by refinement sweeps against the
// unregularized system so the ridge only stabilizes the factorization.
GroupFit fit_group(int key, const Mat& raw, const Mat& targets, const BasisSpec& spec, int step) {
    const int count = static_cast<int>(raw.rows());
    const int F = static_cast<int>(raw.cols());
    GroupFit fit;
    GroupModel& g = fit.model;
    g.key = key;

    std::vector<double> mean(F), scale(F);
    for (int a = 0; a < F; ++a) {
        const double mu = raw.col(a).mean();
        const double sd = std::sqrt((raw.col(a).array() - mu).square().sum() / count);
        if (sd > 1e-12 * std::max(1.0, std::abs(mu))) {
            g.features.push_back(a);
            mean[a] = mu;
            scale[a] = sd;
        }
    }
    const int f = static_cast<int>(g.features.size());
    g.mean.resize(f);
    g.scale.resize(f);
    for (int a = 0; a < f; ++a) {
        g.mean(a) = mean[g.features[a]];
        g.scale(a) = scale[g.features[a]];
    }
    int degree = f == 0 ? 0 : std::clamp(spec.degree, 0, 2);
    while (degree > 0 && 5 * basis_size(f, degree) > count) --degree;

    Mat z(count, f);
    for (int r = 0; r < count; ++r) {
        for (int a = 0; a < f; ++a) z(r, a) = (raw(r, g.features[a]) - g.mean(a)) / g.scale(a);
    }
    for (;; --degree) {
        const int nb = basis_size(f, degree);
        Mat A(count, nb);
        Eigen::Matrix<double, 1, Eigen::Dynamic> zr(f);
        std::vector<double> row(nb);
        for (int r = 0; r < count; ++r) {
            for (int a = 0; a < f; ++a) zr(a) = z(r, a);
            basis_row(zr.data(), f, degree, row.data());
            for (int c = 0; c < nb; ++c) A(r, c) = row[c];
        }
        const Mat G = (A.transpose() * A) / count;
        const Mat b = (A.transpose() * targets) / count;
        Eigen::SelfAdjointEigenSolver<Mat> eig(G, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        const double cond = lo > 0.0 ? hi / lo : kInf;
        if (cond > 1e12) {
            if (degree > 0) continue;
            throw NumericalError("rank-deficient regression, condition number " + format_double(cond), -1, step);
        }
        const double ridge = spec.ridge * G.trace() / nb;
        const Eigen::LDLT<Mat> ldlt(G + ridge * Mat::Identity(nb, nb));
        Mat coef = ldlt.solve(b);
        for (int sweep = 0; sweep < 2; ++sweep) coef += ldlt.solve(b - G * coef);
        const double bnorm = b.norm();
        fit.residual = bnorm > 0.0 ? (b - G * coef).norm() / bnorm : (G * coef).norm();
        fit.condition = cond;
        g.degree = degree;
        g.coef = std::move(coef);
        return fit;
    }
}

// Fitted targets for one path from a group model.
Eigen::RowVectorXd predict(const GroupModel& g, const double* raw) {
    const int f = static_cast<int>(g.features.size());
    std::vector<double> z(f), row(basis_size(f, g.degree));
    standardized(g, raw, z.data());
    basis_row(z.data(), f, g.degree, row.data());
    const Eigen::Map<const Eigen::RowVectorXd> r(row.data(), static_cast<Eigen::Index>(row.size()));
    return r * g.coef;
}

struct PointValue {
    double y;
    SmallVec z, u, arg;
    double driver;
};

// One backward step at a single path given the fitted conditional expectations.
PointValue step_value(const GeneratorSpec& gen, const BsdeProblem& problem, std::size_t local, int step,
                      const Eigen::RowVectorXd& fitted) {
    const int n = problem.n_assets();
    const int p = problem.n_defaults();
    const double dt = problem.grid().dt();
    const LocalCoefficients c = problem.coefficients(local, step);
    const StrategyContext ctx = problem.context(local, step);
    PointValue v;
    const double yhat = fitted(0);
    v.z.resize(n);
    v.u.resize(p);
    for (int k = 0; k < n; ++k) v.z(k) = fitted(1 + k) / dt;
    for (int j = 0; j < p; ++j) {
        const double scale = c.lambda(j) * dt;
        v.u(j) = scale < 1e-12 ? 0.0 : fitted(1 + n + j) / scale;
    }
    DriverOutput g = gen.driver(DriverInput{ctx, c, yhat, v.z, v.u});
    const double first = yhat + g.value * dt;
    g = gen.driver(DriverInput{ctx, c, first, v.z, v.u});
    v.y = yhat + g.value * dt;
    v.driver = g.value;
    v.arg = std::move(g.arg);
    if (!std::isfinite(v.y)) throw NumericalError("non-finite BSDE value");
    if (gen.upper_bound) {
        if (std::abs(v.y) > 10.0 * *gen.upper_bound) {
            throw NumericalError("BSDE diverged: |Y| exceeds 10x the declared bound");
        }
        v.y = std::clamp(v.y, 0.0, *gen.upper_bound);
    }
    return v;
}

}  // namespace

BsdeSolution solve_bsde(const GeneratorSpec& gen, const BsdeProblem& problem, const BasisSpec& basis) {
    if (!gen.driver || !gen.terminal) throw ValidationError("generator", "driver and terminal are required");
    if (basis.degree < 0 || basis.degree > 2) throw ValidationError("numerics.basis_degree", "must be 0, 1 or 2");
    if (!(basis.ridge >= 0.0)) throw ValidationError("numerics.ridge", "must be >= 0");
    const int np = problem.n_paths();
    const int m = problem.steps();
    const int n = problem.n_assets();
    const int p = problem.n_defaults();
    const int F = problem.n_features();
    const int K = 1 + n + p;

    BsdeSolution sol;
    sol.n_paths = np;
    sol.n_steps = m;
    sol.n_assets = n;
    sol.n_defaults = p;
    sol.basis = basis;
    sol.Y.resize(static_cast<std::size_t>(np) * (m + 1));
    sol.Z.assign(static_cast<std::size_t>(np) * m * n, 0.0);
    sol.U.assign(static_cast<std::size_t>(np) * m * p, 0.0);
    sol.diagnostics.resize(m);
    sol.models.resize(m);
    bool has_arg = false;

    for (int path = 0; path < np; ++path) {
        const double xi = gen.terminal(problem.global(path));
        if (!std::isfinite(xi)) throw NumericalError("non-finite terminal value", path, m);
        sol.Y[static_cast<std::size_t>(path) * (m + 1) + m] = xi;
    }

    std::vector<double> raw(static_cast<std::size_t>(np) * std::max(F, 1));
    for (int i = m - 1; i >= 0; --i) {
        std::map<int, std::vector<int>> groups;
        for (int path = 0; path < np; ++path) {
            groups[problem.key(path, i)].push_back(path);
            problem.features(path, i, raw.data() + static_cast<std::size_t>(path) * F);
        }
        StepDiagnostics& diag = sol.diagnostics[i];
        diag.groups = static_cast<int>(groups.size());
        diag.min_group_size = np;
        diag.degree = basis.degree;
        StepModel& model = sol.models[i];
        std::vector<Eigen::RowVectorXd> fitted(np);
        double ssr = 0.0, sst = 0.0;
        for (const auto& [key, rows] : groups) {
            const int count = static_cast<int>(rows.size());
            Mat X(count, F), T(count, K);
            double ybar = 0.0;
            for (int r = 0; r < count; ++r) ybar += sol.y(rows[r], i + 1);
            ybar /= count;
            for (int r = 0; r < count; ++r) {
                const int path = rows[r];
                for (int a = 0; a < F; ++a) X(r, a) = raw[static_cast<std::size_t>(path) * F + a];
                const double y1 = sol.y(path, i + 1);
                const SmallVec dw = problem.dW(path, i);
                const SmallVec dm = problem.dM(path, i);
                // Centering by the group mean leaves E[. dW], E[. dM] unchanged and cuts variance.
                T(r, 0) = y1;
                for (int k = 0; k < n; ++k) T(r, 1 + k) = (y1 - ybar) * dw(k);
                for (int j = 0; j < p; ++j) T(r, 1 + n + j) = (y1 - ybar) * dm(j);
            }
            GroupFit fit = fit_group(key, X, T, basis, i);
            for (int r = 0; r < count; ++r) {
                const int path = rows[r];
                fitted[path] = predict(fit.model, raw.data() + static_cast<std::size_t>(path) * F);
                const double e = T(r, 0) - fitted[path](0);
                ssr += e * e;
                sst += (T(r, 0) - ybar) * (T(r, 0) - ybar);
            }
            diag.condition = std::max(diag.condition, fit.condition);
            diag.residual = std::max(diag.residual, fit.residual);
            diag.min_group_size = std::min(diag.min_group_size, count);
            diag.degree = std::min(diag.degree, fit.model.degree);
            model.groups.push_back(std::move(fit.model));
        }
        diag.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;

        std::vector<PointValue> values(np);
        parallel_for(static_cast<std::size_t>(np), [&](std::size_t path) {
            try {
                values[path] = step_value(gen, problem, path, i, fitted[path]);
            } catch (const NumericalError& e) {
                if (e.path() >= 0) throw;
                throw NumericalError(e.what(), static_cast<long>(problem.global(path)), i);
            }
        });
        if (i == m - 1) {
            has_arg = values[0].arg.size() > 0;
            if (has_arg) sol.argopt.assign(static_cast<std::size_t>(np) * m * n, 0.0);
        }
        for (int path = 0; path < np; ++path) {
            const PointValue& v = values[path];
            sol.Y[static_cast<std::size_t>(path) * (m + 1) + i] = v.y;
            std::copy_n(v.z.data(), n, sol.Z.data() + (static_cast<std::size_t>(path) * m + i) * n);
            std::copy_n(v.u.data(), p, sol.U.data() + (static_cast<std::size_t>(path) * m + i) * p);
            if (has_arg && v.arg.size() == n) {
                std::copy_n(v.arg.data(), n, sol.argopt.data() + (static_cast<std::size_t>(path) * m + i) * n);
            }
        }
    }

    std::vector<double> y0(np), y1(np);
    for (int path = 0; path < np; ++path) {
        y0[path] = sol.y(path, 0);
        y1[path] = sol.y(path, 1);
    }
    sol.Y0 = pairwise_sum(y0) / np;
    sol.Y0_se = estimate_mean(y1).se;
    return sol;
}

std::vector<double> evaluate_bsde(const BsdeSolution& sol, const GeneratorSpec& gen, const BsdeProblem& problem,
                                  std::vector<double>* argopt) {
    if (problem.steps() != sol.n_steps || problem.n_assets() != sol.n_assets ||
        problem.n_defaults() != sol.n_defaults) {
        throw ValidationError("problem", "grid or dimensions differ from the solved problem");
    }
    const int np = problem.n_paths();
    const int m = problem.steps();
    const int n = problem.n_assets();
    const int F = problem.n_features();
    std::vector<double> Y(static_cast<std::size_t>(np) * (m + 1));
    if (argopt) argopt->assign(static_cast<std::size_t>(np) * m * n, 0.0);
    parallel_for(static_cast<std::size_t>(np), [&](std::size_t path) {
        std::vector<double> raw(std::max(F, 1));
        Y[path * (m + 1) + m] = gen.terminal(problem.global(path));
        for (int i = 0; i < m; ++i) {
            const GroupModel* g = sol.models[i].find(problem.key(path, i));
            if (!g) {
                throw NumericalError("state not covered by the regression of this step",
                                     static_cast<long>(problem.global(path)), i);
            }
            problem.features(path, i, raw.data());
            PointValue v;
            try {
                v = step_value(gen, problem, path, i, predict(*g, raw.data()));
            } catch (const NumericalError& e) {
                if (e.path() >= 0) throw;
                throw NumericalError(e.what(), static_cast<long>(problem.global(path)), i);
            }
            Y[path * (m + 1) + i] = v.y;
            if (argopt && v.arg.size() == n) std::copy_n(v.arg.data(), n, argopt->data() + (path * m + i) * n);
        }
    });
    return Y;
}

double probe_lipschitz(const GeneratorSpec& gen, const BsdeProblem& problem, double y_scale, int samples,
                       std::uint64_t seed) {
    auto rng = stream_engine(seed, 0x11b5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> pick_path(0, problem.n_paths() - 1);
    std::uniform_int_distribution<int> pick_step(0, problem.steps() - 1);
    const int n = problem.n_assets();
    const int p = problem.n_defaults();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const std::size_t path = pick_path(rng);
        const int step = pick_step(rng);
        const LocalCoefficients c = problem.coefficients(path, step);
        const StrategyContext ctx = problem.context(path, step);
        auto draw = [&](double& y, SmallVec& z, SmallVec& u) {
            y = y_scale * (0.05 + 0.95 * unif(rng));
            z.resize(n);
            u.resize(p);
            for (int k = 0; k < n; ++k) z(k) = y_scale * (2.0 * unif(rng) - 1.0);
            for (int j = 0; j < p; ++j) u(j) = y * (1.5 * unif(rng) - 0.5);
        };
        double ya, yb;
        SmallVec za, zb, ua, ub;
        draw(ya, za, ua);
        if (s % 2 == 0) {
            draw(yb, zb, ub);
        } else {
            // nearby pair: local slope
            const double h = 1e-4 * y_scale;
            yb = ya + h * (2.0 * unif(rng) - 1.0);
            zb = za;
            ub = ua;
            for (int k = 0; k < n; ++k) zb(k) += h * (2.0 * unif(rng) - 1.0);
            for (int j = 0; j < p; ++j) ub(j) += h * (2.0 * unif(rng) - 1.0);
        }
        const double ga = gen.driver(DriverInput{ctx, c, ya, za, ua}).value;
        const double gb = gen.driver(DriverInput{ctx, c, yb, zb, ub}).value;
        const double dist = std::sqrt((ya - yb) * (ya - yb) + (za - zb).squaredNorm() + (ua - ub).squaredNorm());
        if (dist > 0.0) worst = std::max(worst, std::abs(ga - gb) / dist);
    }
    return worst;
}

GeneratorSpec linear_power_generator(const StrategyFn& pi, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("utility.gamma", "power utility needs gamma in (0, 1)");
    GeneratorSpec gen;
    gen.terminal = [](std::size_t) { return 1.0; };
    gen.driver = [pi, gamma](const DriverInput& in) {
        const SmallVec a = pi(in.ctx);
        const auto& c = in.coeffs;
        const SmallVec exposure = c.sigma.transpose() * a;
        double v = gamma * (in.y * a.dot(c.mu) + a.dot(c.sigma * in.z)) +
                   0.5 * gamma * (gamma - 1.0) * exposure.squaredNorm() * in.y;
        for (int j = 0; j < c.lambda.size(); ++j) {
            if (c.lambda(j) == 0.0) continue;
            const double base = 1.0 + a.dot(c.beta.col(j));
            if (base < 0.0) {
                throw NumericalError("strategy violates 1 + pi'beta >= 0", static_cast<long>(in.ctx.path),
                                     in.ctx.step);
            }
            v += c.lambda(j) * (std::pow(base, gamma) - 1.0) * (in.y + in.u(j));
        }
        return DriverOutput{v, a};
    };
    return gen;
}

BsdeSolution solve_linear_bsde_for_strategy(const StrategyFn& pi, const ModelSpec& spec, const PathBundle& paths,
                                            double gamma, const BasisSpec& basis) {
    return solve_bsde(linear_power_generator(pi, gamma), BsdeProblem(spec, paths, Information::full), basis);
}

void write_bsde_csv(std::ostream& out, const BsdeSolution& sol, const TimeGrid& grid) {
    CsvWriter csv(out);
    csv.header({"step", "t", "Y_mean", "Y_sd", "Z_mean", "U_mean", "argopt_mean", "R2"});
    const int np = sol.n_paths;
    std::vector<double> y(np), z(np), u(np), a(np);
    for (int i = 0; i <= sol.n_steps; ++i) {
        for (int path = 0; path < np; ++path) {
            y[path] = sol.y(path, i);
            const bool cell = i < sol.n_steps;
            const std::size_t at = static_cast<std::size_t>(path) * sol.n_steps + i;
            z[path] = cell ? sol.Z[at * sol.n_assets] : 0.0;
            u[path] = cell ? sol.U[at * sol.n_defaults] : 0.0;
            a[path] = cell && !sol.argopt.empty() ? sol.argopt[at * sol.n_assets] : 0.0;
        }
        const MeanEstimate ys = estimate_mean(y);
        const double r2 = i < sol.n_steps ? sol.diagnostics[i].r2 : 1.0;
        csv << i << grid.time(i) << ys.mean << ys.sd << pairwise_sum(z) / np << pairwise_sum(u) / np
            << pairwise_sum(a) / np << r2;
        csv.end_row();
    }
}

}  // namespace credopt
