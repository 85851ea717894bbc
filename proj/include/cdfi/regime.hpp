#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cdfi/moments.hpp"
#include "cdfi/rates.hpp"

namespace cdfi {

enum class Regime { I, II, oscillating, undecided };
enum class SeriesDiagnostic { convergent, divergent, undecided };

std::string_view regime_name(Regime r);
std::string_view series_name(SeriesDiagnostic s);

struct RegimeReport {
    double alpha_estimate = 0;              // 0 for regime I, liminf for oscillating
    Regime regime = Regime::undecided;
    std::vector<double> subsequence_limits;  // residue-class limits when oscillating
    int period = 1;
    double trend_slope = 0;                  // d log r_n / d log n on the top half-window
    SeriesDiagnostic sum_r_squared = SeriesDiagnostic::undecided;
    double rv_index_mu = 0;
    std::int64_t window_lo = 0, window_hi = 0;
    std::vector<std::string> notes;

    std::string to_json() const;
};

inline constexpr double kRegimeThreshold = 0.01;

RegimeReport regime(const AnalysisTable& table);
RegimeReport regime(const RateModel& model, std::int64_t lo, std::int64_t hi, double tol = 1e-9);

} // namespace cdfi
