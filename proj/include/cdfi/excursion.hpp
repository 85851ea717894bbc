#pragma once

#include <cstdint>

#include "cdfi/rates.hpp"

namespace cdfi {

// Moments of H_n, the number of births between T_n and T_{n-1}.
struct ExcursionMoments {
    double mean = 0, second = 0;
    double mean_lo = 0, mean_hi = 0, second_lo = 0, second_hi = 0;
    std::int64_t truncation_level = 0;
};

// Backward recursions seeded at a truncation level N with the bracket [0, random-walk bound];
// N is doubled until both brackets are narrower than tol (relative to max(1, value)).
ExcursionMoments excursion_moments(const RateModel& model, std::int64_t n, double tol = 1e-10);

} // namespace cdfi
