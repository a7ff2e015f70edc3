#ifndef MEDNER_UTIL_MATH_HPP
#define MEDNER_UTIL_MATH_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace medner {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum(exp(x))) with the running max subtracted. All -inf input gives -inf.
inline double log_sum_exp(std::span<const double> x) {
    if (x.empty()) return kNegInf;
    const double m = *std::max_element(x.begin(), x.end());
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

inline double sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline bool all_finite(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace medner

#endif  // MEDNER_UTIL_MATH_HPP
