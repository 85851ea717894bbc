#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cdfi/rates.hpp"

namespace cdfi {

// P(sum_i E_i <= t) for independent E_i ~ Exp(rates[i]), by uniformization of the
// underlying pure-death chain.  Throws ResourceError when rate * t needs too many steps.
double hypoexp_cdf(std::span<const double> rates, double t);
// Same for an ascending-or-not grid of times, in one pass over the chain.
std::vector<double> hypoexp_cdf(std::span<const double> rates, std::span<const double> ts);

// Distinct-rate partial fractions; only for <= 30 rates (cross-check of the above).
double hypoexp_cdf_partial_fractions(std::span<const double> rates, double t);

// mu_1..mu_N of a pure-death model (the extinction time from N is hypoexponential).
std::vector<double> pure_death_rates(const RateModel& model, std::int64_t N);

} // namespace cdfi
