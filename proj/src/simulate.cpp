#include "cdfi/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cdfi/detail/logmath.hpp"
#include "cdfi/error.hpp"
#include "cdfi/io.hpp"
#include "cdfi/moments.hpp"
#include "cdfi/parallel.hpp"
#include "cdfi/rng.hpp"
#include "cdfi/stats.hpp"

namespace cdfi {

using detail::kNaN;

namespace {

void level_rates(const RateModel& m, std::int64_t n, double& total, double& p_up) {
    const double lb = m.log_birth(n), ld = m.log_death(n);
    const double lt = detail::log_add(lb, ld);
    total = std::exp(lt);
    p_up = lb == -detail::kInf ? 0.0 : std::exp(lb - lt);
}

} // namespace

RateCache::RateCache(const RateModel& model, std::int64_t top)
    : model_(model), top_(std::max<std::int64_t>(top, 1)), total_(std::size_t(top_ + 1)), p_up_(std::size_t(top_ + 1)) {
    for (std::int64_t n = 0; n <= top_; ++n) level_rates(model_, n, total_[std::size_t(n)], p_up_[std::size_t(n)]);
}

double RateCache::total(std::int64_t n) const noexcept {
    if (n <= top_) return total_[std::size_t(n)];
    double t, p;
    level_rates(model_, n, t, p);
    return t;
}

double RateCache::p_up(std::int64_t n) const noexcept {
    if (n <= top_) return p_up_[std::size_t(n)];
    double t, p;
    level_rates(model_, n, t, p);
    return p;
}

std::string_view termination_name(Termination t) {
    switch (t) {
    case Termination::absorbed: return "absorbed";
    case Termination::stopped: return "stopped";
    case Termination::censored: return "censored";
    case Termination::runaway: return "runaway";
    }
    return "censored";
}

std::optional<double> TrajectoryRecord::T(std::int64_t n) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == n && !std::isnan(hitting_times[i])) return hitting_times[i];
    return std::nullopt;
}

std::optional<std::int64_t> TrajectoryRecord::H(std::int64_t n) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == n && excursion_births[i] >= 0) return excursion_births[i];
    return std::nullopt;
}

TrajectoryRecord simulate_trajectory(const RateModel& model, std::int64_t N0, double t_max, const RecordRequest& req,
                                     std::uint64_t seed, const SimOptions& opts) {
    const std::int64_t ceiling = opts.ceiling > 0 ? opts.ceiling : 64 * N0;
    return simulate_trajectory(RateCache(model, std::min(ceiling, 2 * N0 + 1024)), N0, t_max, req, seed, opts);
}

TrajectoryRecord simulate_trajectory(const RateCache& rc, std::int64_t N0, double t_max, const RecordRequest& req,
                                     std::uint64_t seed, const SimOptions& opts) {
    const std::int64_t bottom = rc.model().absorbing_level();
    if (N0 < 1 || N0 < bottom) throw std::invalid_argument("simulate_trajectory: N0 must be >= 1 and above the floor");
    if (!(t_max > 0)) throw std::invalid_argument("simulate_trajectory: t_max must be > 0");
    const std::int64_t stop = req.stop_level < 0 ? bottom : req.stop_level;
    if (stop < bottom || stop > N0) throw std::invalid_argument("simulate_trajectory: stop level outside [floor, N0]");

    TrajectoryRecord rec;
    rec.initial_level = N0;
    rec.seed = seed;
    rec.entrance_offset = opts.entrance_offset;
    rec.levels = req.levels;
    std::sort(rec.levels.begin(), rec.levels.end(), std::greater<>());
    rec.levels.erase(std::unique(rec.levels.begin(), rec.levels.end()), rec.levels.end());
    for (auto n : rec.levels)
        if (n > N0 || n < bottom) throw std::invalid_argument("simulate_trajectory: recorded level outside [floor, N0]");
    const std::size_t L = rec.levels.size();
    rec.hitting_times.assign(L, kNaN);
    rec.excursion_births.assign(L, -1);
    rec.observation_times = req.observation_times;
    if (!std::is_sorted(rec.observation_times.begin(), rec.observation_times.end()))
        throw std::invalid_argument("simulate_trajectory: observation times must be sorted");
    const std::size_t nobs = rec.observation_times.size();
    rec.observed_states.assign(nobs, -1);
    const std::int64_t ceiling = opts.ceiling > 0 ? opts.ceiling : 64 * N0;

    Xoshiro256pp rng(seed);
    double t = opts.entrance_offset;
    std::int64_t state = N0, low = N0, births_since_low = 0;
    std::size_t iT = 0, iH = 0, iobs = 0;
    while (iT < L && rec.levels[iT] == N0) rec.hitting_times[iT++] = t;
    while (iobs < nobs && rec.observation_times[iobs] < t) ++iobs;  // before entrance: unknown
    rec.max_state = N0;

    if (state == stop) {
        rec.termination = stop == bottom ? Termination::absorbed : Termination::stopped;
    } else {
        while (true) {
            const double t_new = t + rng.exponential(rc.total(state));
            while (iobs < nobs && rec.observation_times[iobs] < t_new) rec.observed_states[iobs++] = state;
            if (t_new > t_max) {
                rec.termination = Termination::censored;
                t = t_max;
                break;
            }
            t = t_new;
            ++rec.event_count;
            const double p = rc.p_up(state);
            if (p > 0 && rng.uniform() < p) {
                ++state;
                ++births_since_low;
                ++rec.births;
                rec.max_state = std::max(rec.max_state, state);
                if (state > ceiling) {
                    rec.termination = Termination::runaway;
                    break;
                }
                continue;
            }
            if (--state >= low) continue;
            low = state;
            while (iH < L && rec.levels[iH] > low + 1) ++iH;
            if (iH < L && rec.levels[iH] == low + 1) rec.excursion_births[iH++] = births_since_low;
            births_since_low = 0;
            if (iT < L && rec.levels[iT] == low) rec.hitting_times[iT++] = t;
            if (state == stop) {
                rec.termination = stop == bottom ? Termination::absorbed : Termination::stopped;
                break;
            }
        }
    }
    if (rec.termination == Termination::absorbed) {
        rec.extinction_time = t;
        while (iobs < nobs) rec.observed_states[iobs++] = bottom;
    }
    rec.end_time = t;
    return rec;
}

TauSample simulate_tau(const RateModel& model, std::int64_t n, std::int64_t reps, std::uint64_t seed, int workers) {
    if (n < model.absorbing_level()) throw std::invalid_argument("simulate_tau: n below the absorbing level");
    if (reps < 1) throw std::invalid_argument("simulate_tau: reps must be >= 1");
    const std::int64_t N0 = n + 1;
    const RateCache rc(model, 64 * N0 + 1024);
    RecordRequest req;
    req.stop_level = n;
    TauSample out;
    out.seed = seed;
    out.tau.resize(std::size_t(reps));
    out.births.resize(std::size_t(reps));
    std::vector<char> runaway(std::size_t(reps), 0);
    parallel_for(reps, resolve_workers(workers), [&](std::int64_t i) {
        const auto r = simulate_trajectory(rc, N0, detail::kInf, req, stream_seed(seed, std::uint64_t(i)));
        out.tau[std::size_t(i)] = r.termination == Termination::runaway ? kNaN : r.end_time;
        out.births[std::size_t(i)] = r.births;
        runaway[std::size_t(i)] = r.termination == Termination::runaway;
    });
    for (char c : runaway) out.runaway += c;
    return out;
}

namespace {

struct Moments {
    std::int64_t count = 0;
    double mean = 0, var = 0;
};

Moments moments_of(const std::vector<double>& v) {
    Moments m;
    double s = 0;
    for (double x : v) s += x;
    m.count = std::int64_t(v.size());
    if (v.empty()) return m;
    m.mean = s / double(v.size());
    double ss = 0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.var = v.size() > 1 ? ss / double(v.size() - 1) : 0.0;
    return m;
}

void transform_of(const std::vector<double>& v, double scale, const std::vector<double>& as, std::vector<double>& est,
                  std::vector<double>& se) {
    est.assign(as.size(), kNaN);
    se.assign(as.size(), kNaN);
    if (v.empty()) return;
    for (std::size_t j = 0; j < as.size(); ++j) {
        std::vector<double> e;
        e.reserve(v.size());
        for (double x : v) e.push_back(std::exp(-as[j] * x / scale));
        const auto m = moments_of(e);
        est[j] = m.mean;
        se[j] = std::sqrt(m.var / double(m.count));
    }
}

} // namespace

Ensemble monte_carlo(const RateModel& model, const EnsemblePlan& plan) {
    if (plan.reps < 1) throw std::invalid_argument("monte_carlo: reps must be >= 1");
    if (plan.N0 < 1) throw std::invalid_argument("monte_carlo: N0 must be >= 1");
    if (!std::is_sorted(plan.t_grid.begin(), plan.t_grid.end()))
        throw std::invalid_argument("monte_carlo: t_grid must be increasing");
    for (double t : plan.t_grid)
        if (!(t > 0)) throw std::invalid_argument("monte_carlo: t_grid must be positive");

    Ensemble ens;
    auto& sum = ens.summary;
    sum.replications = plan.reps;
    sum.master_seed = plan.master_seed;
    sum.coverage_z = plan.wilson_z;
    sum.N0 = plan.N0;
    sum.laplace_points = plan.laplace_points;

    SimOptions opts;
    opts.ceiling = plan.ceiling > 0 ? plan.ceiling : 64 * plan.N0;
    if (plan.entrance == Entrance::mean_offset) opts.entrance_offset = hitting_mean_from_infinity(model, plan.N0);
    sum.entrance_offset = opts.entrance_offset;

    RecordRequest req;
    req.levels = plan.levels;
    req.observation_times = plan.observation_times;
    req.stop_level = plan.stop_level;
    const RateCache rc(model, std::min(opts.ceiling, 2 * plan.N0 + 1024));

    std::vector<TrajectoryRecord> recs(std::size_t(plan.reps));
    parallel_for(plan.reps, resolve_workers(plan.workers), [&](std::int64_t i) {
        recs[std::size_t(i)] = simulate_trajectory(rc, plan.N0, plan.t_max, req,
                                                   stream_seed(plan.master_seed, std::uint64_t(i)), opts);
    });

    // Ordered reduction: results depend only on the replicate index, never on scheduling.
    for (const auto& r : recs) {
        sum.censored += r.termination == Termination::censored;
        sum.runaway += r.termination == Termination::runaway;
        sum.events += r.event_count;
    }

    std::vector<std::int64_t> levels = plan.levels;
    std::sort(levels.begin(), levels.end(), std::greater<>());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::optional<AnalysisTable> exact;
    if (plan.entrance == Entrance::mean_offset && !levels.empty())
        exact = AnalysisTable::build(model, levels.back(), levels.front());

    for (std::size_t li = 0; li < levels.size(); ++li) {
        const std::int64_t n = levels[li];
        LevelSummary ls;
        ls.n = n;
        std::vector<double> T, tau;
        const bool have_next = n + 1 == plan.N0 || std::find(levels.begin(), levels.end(), n + 1) != levels.end();
        for (const auto& r : recs) {
            const auto Tn = r.T(n);
            if (!Tn) continue;
            T.push_back(*Tn);
            if (have_next) {
                const auto Tn1 = r.T(n + 1);
                tau.push_back(*Tn - (n + 1 == plan.N0 ? r.entrance_offset : Tn1.value_or(kNaN)));
            }
        }
        const auto mT = moments_of(T);
        ls.count = mT.count;
        ls.mean_T = mT.mean;
        ls.var_T = mT.var;
        const auto mt = moments_of(tau);
        ls.tau_count = mt.count;
        ls.mean_tau = mt.mean;
        ls.var_tau = mt.var;
        if (exact) {
            ls.scale_T = exact->at(n).E_inf_T;
            ls.scale_tau = exact->at(n).m;
        }
        transform_of(T, ls.scale_T, plan.laplace_points, ls.transform_T, ls.transform_T_se);
        transform_of(tau, ls.scale_tau, plan.laplace_points, ls.transform_tau, ls.transform_tau_se);
        sum.levels.push_back(std::move(ls));
    }

    for (double t : plan.t_grid) {
        CdfPoint c;
        c.t = t;
        for (const auto& r : recs) {
            const bool known = r.absorbed() || (r.termination == Termination::censored && r.end_time >= t);
            if (!known) continue;
            ++c.reps;
            c.hits += r.absorbed() && r.extinction_time <= t;
        }
        const auto w = wilson_interval(c.hits, c.reps, plan.wilson_z);
        c.estimate = c.reps > 0 ? double(c.hits) / double(c.reps) : kNaN;
        c.lo = w.first;
        c.hi = w.second;
        c.rare_event = c.hits == 0;
        sum.cdf.push_back(c);
    }
    if (plan.keep_records) ens.records = std::move(recs);
    return ens;
}

void EnsembleSummary::write_levels_csv(std::ostream& os) const {
    CsvWriter w(os);
    w.header({"n", "count", "mean_T", "var_T", "tau_count", "mean_tau", "var_tau"});
    for (const auto& l : levels) {
        w.field(l.n).field(l.count).field(l.mean_T).field(l.var_T).field(l.tau_count).field(l.mean_tau).field(l.var_tau);
        w.end_row();
    }
}

void EnsembleSummary::write_transform_csv(std::ostream& os) const {
    CsvWriter w(os);
    w.header({"n", "a", "scale_T", "transform_T", "se_T", "scale_tau", "transform_tau", "se_tau"});
    for (const auto& l : levels)
        for (std::size_t j = 0; j < laplace_points.size(); ++j) {
            w.field(l.n).field(laplace_points[j]).field(l.scale_T).field(l.transform_T[j]).field(l.transform_T_se[j]);
            w.field(l.scale_tau).field(l.transform_tau[j]).field(l.transform_tau_se[j]);
            w.end_row();
        }
}

void EnsembleSummary::write_cdf_csv(std::ostream& os) const {
    CsvWriter w(os);
    w.header({"t", "hits", "reps", "p", "lo", "hi", "rare_event"});
    for (const auto& c : cdf) {
        w.field(c.t).field(c.hits).field(c.reps).field(c.estimate).field(c.lo).field(c.hi).field(c.rare_event);
        w.end_row();
    }
}

void write_trajectories_csv(std::ostream& os, const std::vector<TrajectoryRecord>& records) {
    CsvWriter w(os);
    w.header({"replicate", "n", "T_n", "H_n"});
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        for (std::size_t k = 0; k < r.levels.size(); ++k) {
            if (std::isnan(r.hitting_times[k])) continue;
            w.field(std::int64_t(i)).field(r.levels[k]).field(r.hitting_times[k]).field(r.excursion_births[k]);
            w.end_row();
        }
    }
}

ProxyReport infinity_proxy_check(const RateModel& model, std::int64_t n_target, const std::vector<std::int64_t>& N0_list,
                                 std::int64_t reps, std::uint64_t seed, int workers) {
    if (N0_list.size() < 2) throw std::invalid_argument("infinity_proxy_check: need at least two starting levels");
    if (!std::is_sorted(N0_list.begin(), N0_list.end()) ||
        std::adjacent_find(N0_list.begin(), N0_list.end()) != N0_list.end())
        throw std::invalid_argument("infinity_proxy_check: N0 list must be strictly increasing");
    if (N0_list.front() < 4 * n_target) throw std::invalid_argument("infinity_proxy_check: N0 must be >= 4 n_target");
    if (reps < 10) throw std::invalid_argument("infinity_proxy_check: reps must be >= 10");

    ProxyReport rep;
    rep.n_target = n_target;
    rep.N0s = N0_list;
    rep.threshold = ks_two_sample_critical(reps, reps, 0.01);
    Entrance entrance = Entrance::mean_offset;
    try {
        hitting_mean_from_infinity(model, N0_list.front());
    } catch (const ConvergenceError&) {
        entrance = Entrance::finite;
    }
    rep.offset_used = entrance == Entrance::mean_offset;

    std::vector<std::vector<double>> samples;
    for (std::size_t i = 0; i < N0_list.size(); ++i) {
        EnsemblePlan plan;
        plan.N0 = N0_list[i];
        plan.reps = reps;
        plan.levels = {n_target};
        plan.stop_level = n_target;
        plan.workers = workers;
        plan.entrance = entrance;
        plan.keep_records = true;
        plan.master_seed = stream_seed(seed, 0x9000'0000ULL + i);
        const auto ens = monte_carlo(model, plan);
        std::vector<double> T;
        for (const auto& r : ens.records)
            if (auto v = r.T(n_target)) T.push_back(*v);
        rep.means.push_back(ens.summary.levels.front().mean_T);
        samples.push_back(std::move(T));
    }
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) rep.ks.push_back(ks_two_sample(samples[i], samples[i + 1]));

    rep.stable = rep.ks.back() <= rep.threshold;
    if (rep.stable) {
        std::size_t first = rep.ks.size();
        while (first > 0 && rep.ks[first - 1] <= rep.threshold) --first;
        rep.recommended_N0 = N0_list[first];
        rep.outcome = "stable";
    } else {
        rep.recommended_N0 = 0;
        rep.outcome = "increase N0: distance " + format_real(rep.ks.back()) + " above threshold " +
                      format_real(rep.threshold);
    }
    return rep;
}

std::vector<CdfPoint> estimate_extinction_cdf(const RateModel& model, std::int64_t N0, const std::vector<double>& t_grid,
                                              std::int64_t reps, std::uint64_t seed, int workers, double z) {
    EnsemblePlan plan;
    plan.N0 = N0;
    plan.reps = reps;
    plan.t_grid = t_grid;
    plan.master_seed = seed;
    plan.workers = workers;
    plan.wilson_z = z;
    return monte_carlo(model, plan).summary.cdf;
}

} // namespace cdfi
