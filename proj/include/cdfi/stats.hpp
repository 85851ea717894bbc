#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdfi/moments.hpp"
#include "cdfi/rates.hpp"
#include "cdfi/simulate.hpp"

namespace cdfi {

// passed <=> statistic <= threshold.  Informative checks are reported but do not gate.
struct CheckResult {
    std::string name;
    double statistic = 0, threshold = 0;
    bool passed = false;
    bool informative = false;
    std::int64_t sample_size = 0;
    std::int64_t n = -1;  // level, -1 when not applicable
    std::int64_t reps = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> details;

    CheckResult& detail(const std::string& key, double value);
    CheckResult& detail(const std::string& key, const std::string& value);
    CheckResult& decide() {
        passed = statistic <= threshold;
        return *this;
    }
};

struct CheckContext {
    std::int64_t n = -1;
    std::int64_t reps = 0;
    std::uint64_t seed = 0;
};

double normal_cdf(double x);
// Kolmogorov distance between the empirical law of samples and a continuous cdf.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
// Same for integer-valued samples, comparing against cdf(x + 1/2) at each lattice point.
double ks_statistic_lattice(std::vector<std::int64_t> samples, const std::function<double(double)>& cdf);
double ks_critical(std::int64_t n, double alpha = 0.01);
double ks_two_sample(std::vector<double> a, std::vector<double> b);
double ks_two_sample_critical(std::int64_t n, std::int64_t m, double alpha = 0.01);
std::pair<double, double> wilson_interval(std::int64_t hits, std::int64_t n, double z);

struct SampleMoments {
    std::int64_t count = 0;
    double mean = 0, var = 0, se_mean = 0, se_var = 0;
};
SampleMoments sample_moments(std::span<const double> x);
// Mean of x^k with standard error.
std::pair<double, double> raw_moment(std::span<const double> x, int k);

// |mean(T/E) - 1| against 3 sd/sqrt(reps); needs >= 1000 samples.
CheckResult lln_check(std::span<const double> samples, double exact_E, const CheckContext& ctx = {});

// KS distance of (T - mean)/sqrt(var) to N(0,1) at the 1% level; needs >= 10^4 samples.
CheckResult clt_check_T(std::span<const double> samples, double mean, double var, const CheckContext& ctx = {},
                        bool hypotheses_ok = true);

struct CltHypotheses {
    double variance_ratio_first = 0, variance_ratio_last = 0;  // Var tau_n / Var T_n
    double third_ratio_first = 0, third_ratio_last = 0;        // sum E|tau-m|^3 / Var T_n^{3/2}
    bool holds = false;
};
CltHypotheses clt_hypotheses(const AnalysisTable& table);

// One result per observation time: KS of sqrt((2 rho - 1) v)(X/v - 1) to N(0,1), with continuity
// correction for the integer lattice of X.  Points with v < 30 are informative only.
std::vector<CheckResult> clt_check_X(const std::vector<TrajectoryRecord>& records, SpeedFunction& v, double rho,
                                     const CheckContext& ctx = {});
// |mean(X(t)/v(t)) - 1| against 3 standard errors, one per observation time.
std::vector<CheckResult> speed_ratio_check(const std::vector<TrajectoryRecord>& records, SpeedFunction& v,
                                           const CheckContext& ctx = {});

enum class TailMethod { exact_hypoexp, mc };

struct TailOptions {
    std::int64_t N0 = 400;
    std::int64_t reps = 100000;
    std::uint64_t seed = 1;
    int workers = 1;
    double p_lo = 1e-8, p_hi = 1e-2;
    double tolerance = 0.1;  // relative
    std::optional<double> expected_slope;
};

// Raised when a grid leaves the small-time window; carries a suggested range.
class GridRejected : public std::invalid_argument {
public:
    GridRejected(const std::string& what, double lo, double hi) : std::invalid_argument(what), t_lo(lo), t_hi(hi) {}
    double t_lo, t_hi;
};

// Time range where P(T_0 <= t) from N0 lies in [p_lo, p_hi], by one scan of the exact law.
std::pair<double, double> suggest_tail_grid(const RateModel& model, std::int64_t N0, double p_lo = 1e-8,
                                            double p_hi = 1e-2);
CheckResult tail_index_check(const RateModel& model, TailMethod method, std::span<const double> t_grid,
                             const TailOptions& opts = {});

CheckResult exp_moment_estimate(const RateModel& model, double a, std::int64_t k, std::int64_t k_a, std::int64_t reps,
                                std::uint64_t seed, int workers = 1);
// prod_{i=k_a+1}^{k} mu_i/(mu_i - a) for pure death; +inf when a >= some mu_i.
double exp_moment_pure_death(const RateModel& model, double a, std::int64_t k, std::int64_t k_a);

struct SlopeFit {
    double slope = 0, intercept = 0, residual = 0;
};
SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y);

// CSV header check,statistic,threshold,passed,n,reps,seed
void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& checks);
std::string checks_to_json(const std::vector<CheckResult>& checks);

} // namespace cdfi
