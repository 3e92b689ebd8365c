#pragma once

#include "credopt/filtering.hpp"

#include <iosfwd>
#include <optional>

namespace credopt {

enum class Information { full, partial };

/// Everything the backward solver reads from a simulation: the martingale
/// increments (W, M under full information, the innovations W-bar, M-bar under
/// partial information), the driver coefficients, and the regression state.
///
/// A problem may cover a contiguous slice of the bundle's paths; `local`
/// indices below run over that slice.
class BsdeProblem {
public:
    BsdeProblem(const ModelSpec& spec, const PathBundle& paths, Information info,
                const FilterOutput* filter = nullptr);

    /// Same problem restricted to paths [first, first + count) of this one.
    BsdeProblem slice(std::size_t first, int count) const;

    int n_paths() const { return count_; }
    int steps() const { return paths_->steps(); }
    int n_assets() const { return paths_->n_assets; }
    int n_defaults() const { return paths_->n_defaults; }
    const TimeGrid& grid() const { return paths_->grid; }
    Information information() const { return info_; }
    std::size_t global(std::size_t local) const { return first_ + local; }
    const ModelSpec& spec() const { return *spec_; }
    const PathBundle& paths() const { return *paths_; }
    const FilterOutput* filter() const { return filter_; }

    /// Driver coefficients at the left point of cell `step` (filtered drift and
    /// intensity under partial information).
    LocalCoefficients coefficients(std::size_t local, int step) const;
    SmallVec dW(std::size_t local, int step) const;
    SmallVec dM(std::size_t local, int step) const;
    StrategyContext context(std::size_t local, int step) const;

    /// Hard regression key: default pattern, plus the regime under full information.
    int key(std::size_t local, int point) const;
    /// Continuous regressors: log prices, plus posterior coordinates 2..R under partial information.
    int n_features() const;
    void features(std::size_t local, int point, double* out) const;

private:
    const ModelSpec* spec_;
    const PathBundle* paths_;
    const FilterOutput* filter_;
    Information info_;
    std::size_t first_ = 0;
    int count_ = 0;
};

struct DriverInput {
    const StrategyContext& ctx;
    const LocalCoefficients& coeffs;
    double y;
    const SmallVec& z;
    const SmallVec& u;
};

struct DriverOutput {
    double value = 0.0;
    SmallVec arg;  // optimizer (or the strategy in force); empty when not applicable
};

using Driver = std::function<DriverOutput(const DriverInput&)>;

/// Generator g(t, Y, Z, U) and terminal condition of -dY = g dt - Z dW - U dM.
struct GeneratorSpec {
    Driver driver;
    /// Declared Lipschitz constant of g in (y, z, u), Euclidean norm. Optional.
    std::optional<double> lipschitz_bound;
    /// Terminal value by global path index of the bundle.
    std::function<double(std::size_t path)> terminal;
    /// When set, Y is truncated to [0, upper_bound] after each step.
    std::optional<double> upper_bound;
};

struct BasisSpec {
    int degree = 2;
    double ridge = 1e-8;
};

struct StepDiagnostics {
    double r2 = 1.0;
    double condition = 1.0;
    double residual = 0.0;  // relative residual of the unregularized normal equations
    int groups = 0;
    int min_group_size = 0;
    int degree = 0;         // lowest degree used by any group
};

/// One fitted regression of a step: coefficients for the targets
/// (Y_{i+1}, Y_{i+1} dW, Y_{i+1} dM) on the polynomial basis of one key group.
struct GroupModel {
    int key = 0;
    int degree = 0;
    std::vector<int> features;  // indices of the kept continuous features
    Vec mean, scale;            // standardization of the kept features
    Mat coef;                   // basis size x (1 + n + p)
};

struct StepModel {
    std::vector<GroupModel> groups;  // sorted by key
    const GroupModel* find(int key) const;
};

struct BsdeSolution {
    int n_paths = 0;
    int n_steps = 0;
    int n_assets = 1;
    int n_defaults = 1;
    std::vector<double> Y;       // [path][point]
    std::vector<double> Z;       // [path][step][asset]
    std::vector<double> U;       // [path][step][default]
    std::vector<double> argopt;  // [path][step][asset], empty if the driver reports none
    double Y0 = 0.0;
    double Y0_se = 0.0;
    std::vector<StepDiagnostics> diagnostics;  // per step
    std::vector<StepModel> models;             // per step, for evaluation on fresh paths
    BasisSpec basis;

    double y(std::size_t path, int point) const { return Y[path * (n_steps + 1) + point]; }
    double arg(std::size_t path, int step, int asset = 0) const {
        return argopt[(path * n_steps + step) * n_assets + asset];
    }
};

/// Least-squares regression Monte Carlo, backward in time:
///   Yhat = E_i[Y_{i+1}], Z_i = E_i[Y_{i+1} dW] / dt, U_i = E_i[Y_{i+1} dM] / (lambda dt),
///   Y_i = Yhat + g(Yhat, Z, U) dt, then once more with g evaluated at that Y_i.
/// Conditional expectations are projections on total-degree polynomials of the
/// standardized continuous features, fitted separately for each hard key.
/// Throws NumericalError on rank deficiency or divergence (reporting the step).
BsdeSolution solve_bsde(const GeneratorSpec& gen, const BsdeProblem& problem, const BasisSpec& basis = {});

/// Evaluates a solution's per-step regression functions on another problem
/// (fresh paths of the same model). Returns Y [path][point]; Y at the horizon
/// is the terminal value. `argopt`, when non-null, receives the driver arguments.
std::vector<double> evaluate_bsde(const BsdeSolution& sol, const GeneratorSpec& gen, const BsdeProblem& problem,
                                  std::vector<double>* argopt = nullptr);

/// Largest sampled difference quotient |g(a) - g(b)| / |a - b| over random
/// (y, z, u) pairs near the states of the problem.
double probe_lipschitz(const GeneratorSpec& gen, const BsdeProblem& problem, double y_scale, int samples,
                       std::uint64_t seed);

/// Linear BSDE whose Y is E[(X_T^pi / X_t^pi)^gamma | F_t] for a bounded
/// proportional strategy: driver gamma pi(mu y + sigma z) + gamma(gamma-1)/2 |sigma'pi|^2 y
/// + sum_j lambda_j ((1 + pi'beta_j)^gamma - 1)(y + u_j), terminal 1.
GeneratorSpec linear_power_generator(const StrategyFn& pi, double gamma);
BsdeSolution solve_linear_bsde_for_strategy(const StrategyFn& pi, const ModelSpec& spec, const PathBundle& paths,
                                            double gamma, const BasisSpec& basis = {});

/// CSV: step, t, Y_mean, Y_sd, Z_mean, U_mean, argopt_mean, R2.
void write_bsde_csv(std::ostream& out, const BsdeSolution& sol, const TimeGrid& grid);

}  // namespace credopt
