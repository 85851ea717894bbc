#pragma once

#include <cstdint>
#include <functional>
#include <span>

namespace cdfi {

struct IndexFit {
    double index = 0, intercept = 0, residual = 0;
    std::size_t samples = 0;
    double plain_index = 0;   // slope of log value on log index alone
    double log_exponent = 0;  // fitted gamma of a (log n)^gamma factor
};

// Least-squares fit of log value on (log n, log log n) over the top half of the window;
// values[i] is g(n0 + i).  Needs >= 30 positive values.
IndexFit rv_index(std::span<const double> values, std::int64_t n0);

struct TailSumCheck {
    double exact = 0, asymptotic = 0, index = 0;
    double ratio() const noexcept { return exact / asymptotic; }
};

// sum_{k>=n} g(k) against -n g(n)/(rho+1), rho fitted on [n, 2n].  Throws for rho >= -1.
TailSumCheck rv_tail_sum_check(const std::function<double(std::int64_t)>& g, std::int64_t n);

} // namespace cdfi
