#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace cdfi::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline double log_add(double a, double b) noexcept {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

// log(1 - e^x) for x <= 0.
inline double log1m_exp(double x) noexcept {
    return x > -0.693147180559945 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// log(1 + e^x)
inline double log1p_exp(double x) noexcept {
    return x > 35 ? x + std::exp(-x) : std::log1p(std::exp(x));
}

// Running log-sum-exp.
struct LogSum {
    double value = -kInf;
    void add(double x) noexcept { value = log_add(value, x); }
};

struct LineFit {
    double slope = 0, intercept = 0, rms_residual = 0;
};

// Ordinary least squares y ~ slope*x + intercept.  Returns NaN slope if x is degenerate.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) noexcept {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    if (!(sxx > 0)) { f.slope = f.intercept = f.rms_residual = kNaN; return f; }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        ss += r * r;
    }
    f.rms_residual = std::sqrt(ss / double(n));
    return f;
}

} // namespace cdfi::detail
