#pragma once

#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cdfi/rates.hpp"

namespace cdfi {

// Rates outside the harsh epochs.  Pure birth by default: either a constant rate lambda
// (k -> k+1 at rate lambda) or Yule (rate lambda k); any RateModel is accepted as well.
struct MildPhase {
    enum class Kind { constant_birth, yule, model };
    Kind kind = Kind::constant_birth;
    double lambda = 1.0;
    std::optional<RateModel> model;

    static MildPhase constant_birth(double lambda);
    static MildPhase yule(double lambda);
    static MildPhase general(const RateModel& model);
    bool pure_birth() const noexcept { return kind != Kind::model; }
    double birth(std::int64_t n) const noexcept;
    double death(std::int64_t n) const noexcept;
    std::string describe() const;
};

// Harsh interval [a, a + t).  t may be +inf for a final epoch that never ends.
struct Epoch {
    double a = 0, t = 0;
};

// t_i = c / (log max(i, 2))^beta.
struct ScheduleRule {
    double c = 1, beta = 1;
    double t(std::int64_t i) const noexcept;
};

struct EnvSchedule {
    RateModel harsh;
    MildPhase mild;
    std::vector<Epoch> epochs;
    std::optional<ScheduleRule> rule;
    // Filled by the counterexample construction.
    std::vector<std::int64_t> thresholds;  // x_i
    std::vector<double> eps;               // epsilon_i
    std::int64_t initial_state = 0;        // recommended starting level (x_1), 0 = none

    // Throws std::invalid_argument unless intervals are increasing, disjoint and, when
    // generated, match the rule exactly.
    void validate() const;
    // CSV i,a_i,t_i with i starting at 1.
    void write_csv(std::ostream& os) const;
    static std::vector<Epoch> read_csv(std::istream& is);
};

// a_1 = 0, a_{i+1} = a_i + t_i + gap.
EnvSchedule make_schedule(const RateModel& harsh, const MildPhase& mild, double c, double beta,
                          std::int64_t epoch_count, double gap);

struct InhomTrajectory {
    std::vector<std::int64_t> state_at_epoch_end;  // state at a_k + t_k, k = 1..reached
    std::int64_t extinction_epoch = -1;            // first k with the chain extinct at a_k + t_k
    bool extinct_in_mild = false;                  // absorbed during a mild phase
    double extinction_time = std::numeric_limits<double>::quiet_NaN();
    bool censored = false;                         // runaway ceiling hit
    std::int64_t final_state = 0;
    std::int64_t events = 0;
};

struct InhomOptions {
    std::int64_t ceiling = 100000000;
};

// Exact piecewise-homogeneous simulation up to the end of harsh epoch epoch_horizon; the clock
// is redrawn at every interval boundary.  Extinction (the harsh absorbing level) is final.
InhomTrajectory simulate_inhomogeneous(const EnvSchedule& schedule, std::int64_t N0, std::int64_t epoch_horizon,
                                       std::uint64_t seed, const InhomOptions& opts = {});

struct SurvivalEstimate {
    std::int64_t horizon = 0;
    std::int64_t reps = 0;
    std::uint64_t seed = 0;
    std::vector<std::int64_t> survivors;  // index k = 0..horizon, survivors[0] = reps
    std::vector<double> lo, hi;           // Wilson intervals
    double survival_prob = 1, survival_lo = 1, survival_hi = 1;
    std::int64_t censored = 0;
    double threshold = 1e-2;
    bool below_threshold = false;  // finite-horizon surrogate for almost sure extinction
    std::optional<bool> extinction_predicted;  // beta < rho - 1
    double rho = 0, beta = 0, c = 0;

    bool monotone() const;
    // CSV epoch,survivors,reps,lo,hi.
    void write_csv(std::ostream& os) const;
};

struct RunOptions {
    int workers = 1;
    double z = 3.0;
    double threshold = 1e-2;
    std::int64_t ceiling = 100000000;
};

SurvivalEstimate run_schedule(const EnvSchedule& schedule, std::int64_t N0, std::int64_t epoch_count,
                              std::int64_t reps, std::uint64_t seed, const RunOptions& opts = {});

struct CompminOptions : RunOptions {
    std::int64_t N0 = 100;
    double gap = 1.0;
};

// Checks the harsh model (lambda/mu -> 0, fitted index rho > 1), builds the t_i rule schedule and
// runs it.  The estimate records whether beta < rho - 1.
SurvivalEstimate compmin_experiment(const RateModel& harsh, const MildPhase& mild, double c, double beta,
                                    std::int64_t epoch_count, std::int64_t reps, std::uint64_t seed,
                                    const CompminOptions& opts = {});

// epsilon_i = max(2^{-i-2}, 1e-12).
double default_eps(std::int64_t i);

struct CounterexampleOptions {
    double lambda = 100;          // mild rate (constant birth, or Yule per-capita)
    bool yule = false;
    std::int64_t infinity_proxy = 400;  // starting level standing in for infinity
};

// For a pure-death harsh model: thresholds x_i with P_x(T_0 > t_i) >= (1 - eps_i) Pinf(T_0 > t_i), and
// mild gaps long enough that the pure-birth chain from 1 exceeds x_{i+1} with probability >= 1 - eps_i.
EnvSchedule counterexample_schedule(const RateModel& harsh, double c, double beta, std::int64_t epoch_count,
                                    const CounterexampleOptions& opts = {});

// Pure-birth gap g with P_1(Z_g >= x) >= 1 - eps.
double constant_birth_gap(double lambda, std::int64_t x, double eps);
double yule_gap(double lambda, std::int64_t x, double eps);
// P_1(Z_g >= x) for both mild kinds.
double constant_birth_reach(double lambda, double g, std::int64_t x);
double yule_reach(double lambda, double g, std::int64_t x);

// prod_{i<=k} Pinf(T_0 > t_i), k = 0..size, from the exact law started at proxy_N (pure death).
std::vector<double> survival_bound(const RateModel& harsh, const std::vector<Epoch>& epochs, std::int64_t proxy_N = 400);

} // namespace cdfi
