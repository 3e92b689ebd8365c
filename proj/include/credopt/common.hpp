#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace credopt {

/// Largest number of assets or defaults handled by the small fixed-capacity
/// vector types used inside per-path loops.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// SmallVec from listed entries; SmallVec{x} would be read as a size.
inline SmallVec small_vec(std::initializer_list<double> values) {
    SmallVec v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: configuration, model parameters, preconditions.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

protected:
    struct Verbatim {};
    ValidationError(std::string field, const std::string& message, Verbatim)
        : Error(message), field_(std::move(field)) {}

private:
    std::string field_;
};

/// A computation failed (singular volatility, admissibility violation,
/// rank-deficient regression, divergence). Carries the path/step when known.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, long path = -1, long step = -1)
        : Error(decorate(what, path, step)), path_(path), step_(step) {}
    long path() const noexcept { return path_; }
    long step() const noexcept { return step_; }

private:
    static std::string decorate(const std::string& what, long path, long step) {
        std::string out = what;
        if (path >= 0) out += " (path " + std::to_string(path) + ")";
        if (step >= 0) out += " (step " + std::to_string(step) + ")";
        return out;
    }
    long path_;
    long step_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Pairwise (cascade) summation: deterministic order, O(log n) error growth.
double pairwise_sum(std::span<const double> values);

/// Sample mean with its Monte Carlo standard error.
struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;
    double sd = 0.0;
    std::size_t count = 0;
};

MeanEstimate estimate_mean(std::span<const double> values);

/// Uniform time grid 0 = t_0 < ... < t_m = horizon.
struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;

    double dt() const { return horizon / steps; }
    double time(int point) const { return point == steps ? horizon : point * dt(); }
    int points() const { return steps + 1; }
};

/// SplitMix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent generator for stream `stream` (a path index, a batch index)
/// under a 64-bit experiment seed.
inline std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL)));
}

/// Runs fn(i) for i in [0, n), in parallel when OpenMP is enabled. Each index
/// must only write its own output slots. If several iterations throw, the
/// exception of the smallest index is rethrown, so failures are deterministic.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    std::exception_ptr first_error;
    std::size_t first_index = n;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(credopt_parallel_for_error)
#endif
            {
                if (static_cast<std::size_t>(i) < first_index) {
                    first_index = static_cast<std::size_t>(i);
                    first_error = std::current_exception();
                }
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

/// Golden-section maximization of a unimodal function on [lo, hi].
/// Returns the abscissa; stops when the bracket is shorter than tol.
double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double tol = 1e-12, int max_iter = 200);

}  // namespace credopt
