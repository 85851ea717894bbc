#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cdfi/rates.hpp"

namespace cdfi {

// Precomputed total rate and up-probability per level; levels above 'top' are evaluated lazily.
class RateCache {
public:
    RateCache(const RateModel& model, std::int64_t top);
    const RateModel& model() const noexcept { return model_; }
    double total(std::int64_t n) const noexcept;
    double p_up(std::int64_t n) const noexcept;

private:
    RateModel model_;
    std::int64_t top_;
    std::vector<double> total_, p_up_;
};

struct RecordRequest {
    std::vector<std::int64_t> levels;        // first-passage levels to record (<= N0)
    std::vector<double> observation_times;   // sorted; X(t) recorded at each
    std::int64_t stop_level = -1;            // stop on first passage; -1 = absorbing level
};

struct SimOptions {
    double entrance_offset = 0;  // clock value at the start (mean descent time from infinity)
    std::int64_t ceiling = 0;    // runaway ceiling; 0 = 64 * N0
};

enum class Termination { absorbed, stopped, censored, runaway };
std::string_view termination_name(Termination t);

struct TrajectoryRecord {
    std::int64_t initial_level = 0;
    std::uint64_t seed = 0;
    double entrance_offset = 0;
    std::vector<std::int64_t> levels;           // descending
    std::vector<double> hitting_times;          // NaN when not reached
    std::vector<std::int64_t> excursion_births; // births in [T_n, T_{n-1}); -1 when incomplete
    std::vector<double> observation_times;
    std::vector<std::int64_t> observed_states;  // -1 when unknown (before the offset or after a stop)
    double extinction_time = std::numeric_limits<double>::quiet_NaN();
    double end_time = 0;
    Termination termination = Termination::censored;
    std::int64_t event_count = 0;
    std::int64_t births = 0;
    std::int64_t max_state = 0;

    bool absorbed() const noexcept { return termination == Termination::absorbed; }
    std::optional<double> T(std::int64_t n) const;
    std::optional<std::int64_t> H(std::int64_t n) const;
};

TrajectoryRecord simulate_trajectory(const RateModel& model, std::int64_t N0, double t_max,
                                     const RecordRequest& req, std::uint64_t seed, const SimOptions& opts = {});
TrajectoryRecord simulate_trajectory(const RateCache& rates, std::int64_t N0, double t_max,
                                     const RecordRequest& req, std::uint64_t seed, const SimOptions& opts = {});

struct TauSample {
    std::vector<double> tau;
    std::vector<std::int64_t> births;  // births during each passage from n+1 to n
    std::int64_t runaway = 0;
    std::uint64_t seed = 0;
};

// Passage times from n+1 to n.
TauSample simulate_tau(const RateModel& model, std::int64_t n, std::int64_t reps, std::uint64_t seed,
                       int workers = 1);

enum class Entrance { finite, mean_offset };

struct EnsemblePlan {
    std::int64_t N0 = 1000;
    std::int64_t reps = 1000;
    std::vector<std::int64_t> levels;
    std::vector<double> t_grid;            // extinction CDF grid
    std::vector<double> observation_times;
    std::vector<double> laplace_points;
    double t_max = std::numeric_limits<double>::infinity();
    std::int64_t stop_level = -1;
    std::int64_t ceiling = 0;
    int workers = 1;
    std::uint64_t master_seed = 1;
    Entrance entrance = Entrance::finite;
    double wilson_z = 3.0;
    bool keep_records = false;
};

struct LevelSummary {
    std::int64_t n = 0;
    std::int64_t count = 0;  // replicates that reached n
    double mean_T = 0, var_T = 0;
    std::int64_t tau_count = 0;
    double mean_tau = 0, var_tau = 0;
    double scale_T = 1, scale_tau = 1;    // normalisations of the transforms
    std::vector<double> transform_T, transform_T_se, transform_tau, transform_tau_se;
};

struct CdfPoint {
    double t = 0;
    std::int64_t hits = 0, reps = 0;
    double estimate = 0, lo = 0, hi = 0;
    bool rare_event = false;
};

struct EnsembleSummary {
    std::int64_t replications = 0;
    std::uint64_t master_seed = 0;
    double coverage_z = 3.0;
    std::int64_t N0 = 0;
    double entrance_offset = 0;
    std::vector<double> laplace_points;
    std::vector<LevelSummary> levels;
    std::vector<CdfPoint> cdf;
    std::int64_t censored = 0, runaway = 0;
    std::int64_t events = 0;

    void write_levels_csv(std::ostream& os) const;
    void write_transform_csv(std::ostream& os) const;
    void write_cdf_csv(std::ostream& os) const;
};

struct Ensemble {
    EnsembleSummary summary;
    std::vector<TrajectoryRecord> records;  // filled when plan.keep_records
};

Ensemble monte_carlo(const RateModel& model, const EnsemblePlan& plan);
void write_trajectories_csv(std::ostream& os, const std::vector<TrajectoryRecord>& records);

struct ProxyReport {
    std::int64_t n_target = 0;
    std::vector<std::int64_t> N0s;
    std::vector<double> means;
    std::vector<double> ks;  // between consecutive entries of N0s
    double threshold = 0;
    bool stable = false;
    std::int64_t recommended_N0 = 0;
    bool offset_used = false;
    std::string outcome;
};

// Two-sample KS between the laws of T_{n_target} at consecutive starting levels.
ProxyReport infinity_proxy_check(const RateModel& model, std::int64_t n_target,
                                 const std::vector<std::int64_t>& N0_list, std::int64_t reps,
                                 std::uint64_t seed, int workers = 1);

std::vector<CdfPoint> estimate_extinction_cdf(const RateModel& model, std::int64_t N0,
                                              const std::vector<double>& t_grid, std::int64_t reps,
                                              std::uint64_t seed, int workers = 1, double z = 3.0);

} // namespace cdfi
