#include "credopt/common.hpp"

#include <algorithm>

namespace credopt {

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kBlock = 32;
    if (values.size() <= kBlock) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MeanEstimate estimate_mean(std::span<const double> values) {
    MeanEstimate est;
    est.count = values.size();
    if (values.empty()) return est;
    est.mean = pairwise_sum(values) / static_cast<double>(values.size());
    if (values.size() < 2) return est;
    std::vector<double> sq(values.size());
    std::transform(values.begin(), values.end(), sq.begin(), [m = est.mean](double v) {
        return (v - m) * (v - m);
    });
    const double var = pairwise_sum(sq) / static_cast<double>(values.size() - 1);
    est.sd = std::sqrt(var);
    est.se = est.sd / std::sqrt(static_cast<double>(values.size()));
    return est;
}

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double tol, int max_iter) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc >= fd ? c : d;
}

}  // namespace credopt
