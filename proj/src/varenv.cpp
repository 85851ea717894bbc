#include "cdfi/varenv.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "cdfi/detail/logmath.hpp"
#include "cdfi/error.hpp"
#include "cdfi/hypoexp.hpp"
#include "cdfi/io.hpp"
#include "cdfi/parallel.hpp"
#include "cdfi/rng.hpp"
#include "cdfi/simulate.hpp"
#include "cdfi/stats.hpp"

namespace cdfi {

using detail::kInf;
using detail::kNaN;

MildPhase MildPhase::constant_birth(double lambda) {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw std::invalid_argument("mild phase: lambda must be finite and >= 0");
    return MildPhase{Kind::constant_birth, lambda, std::nullopt};
}

MildPhase MildPhase::yule(double lambda) {
    auto m = constant_birth(lambda);
    m.kind = Kind::yule;
    return m;
}

MildPhase MildPhase::general(const RateModel& model) { return MildPhase{Kind::model, 0.0, model}; }

double MildPhase::birth(std::int64_t n) const noexcept {
    switch (kind) {
    case Kind::constant_birth: return lambda;
    case Kind::yule: return lambda * double(n);
    case Kind::model: return model->birth(n);
    }
    return 0;
}

double MildPhase::death(std::int64_t n) const noexcept { return kind == Kind::model ? model->death(n) : 0.0; }

std::string MildPhase::describe() const {
    switch (kind) {
    case Kind::constant_birth: return "constant-birth;lambda=" + format_real(lambda);
    case Kind::yule: return "yule;lambda=" + format_real(lambda);
    case Kind::model: return model->canonical();
    }
    return "";
}

double ScheduleRule::t(std::int64_t i) const noexcept {
    return c / std::pow(std::log(double(std::max<std::int64_t>(i, 2))), beta);
}

void EnvSchedule::validate() const {
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto& e = epochs[i];
        const std::string at = "schedule epoch " + std::to_string(i + 1) + ": ";
        if (!std::isfinite(e.a)) throw std::invalid_argument(at + "start must be finite");
        if (!(e.t > 0)) throw std::invalid_argument(at + "length must be > 0");
        if (std::isinf(e.t) && i + 1 != epochs.size()) throw std::invalid_argument(at + "only the last epoch may be infinite");
        if (i > 0) {
            const auto& p = epochs[i - 1];
            if (!(e.a > p.a)) throw std::invalid_argument(at + "starts must increase");
            if (p.a + p.t > e.a) throw std::invalid_argument(at + "overlaps the previous epoch");
        }
        if (rule && e.t != rule->t(std::int64_t(i) + 1))
            throw std::invalid_argument(at + "length differs from the generating rule");
    }
    if (!thresholds.empty() && thresholds.size() != epochs.size())
        throw std::invalid_argument("schedule: thresholds do not match the epochs");
}

void EnvSchedule::write_csv(std::ostream& os) const {
    CsvWriter w(os);
    w.header({"i", "a_i", "t_i"});
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        w.field(std::int64_t(i + 1)).field(epochs[i].a).field(epochs[i].t);
        w.end_row();
    }
}

std::vector<Epoch> EnvSchedule::read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("schedule CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "i,a_i,t_i") throw std::invalid_argument("schedule CSV: header must be i,a_i,t_i");
    std::vector<Epoch> out;
    std::int64_t row = 1;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[3];
        for (auto& x : f)
            if (!std::getline(ss, x, ',')) throw std::invalid_argument("schedule CSV: row " + std::to_string(row) + " needs 3 fields");
        try {
            if (std::stoll(f[0]) != row) throw std::invalid_argument("index");
            out.push_back({std::stod(f[1]), std::stod(f[2])});
        } catch (const std::exception&) {
            throw std::invalid_argument("schedule CSV: bad row " + std::to_string(row) + ": " + line);
        }
        ++row;
    }
    return out;
}

EnvSchedule make_schedule(const RateModel& harsh, const MildPhase& mild, double c, double beta,
                          std::int64_t epoch_count, double gap) {
    if (!(c > 0) || !(beta > 0)) throw std::invalid_argument("make_schedule: c and beta must be > 0");
    if (epoch_count < 0) throw std::invalid_argument("make_schedule: epoch_count must be >= 0");
    if (!(gap >= 0)) throw std::invalid_argument("make_schedule: gap must be >= 0");
    EnvSchedule s{harsh, mild, {}, ScheduleRule{c, beta}, {}, {}, 0};
    double a = 0;
    for (std::int64_t i = 1; i <= epoch_count; ++i) {
        const double t = s.rule->t(i);
        s.epochs.push_back({a, t});
        a = a + t + gap;
    }
    s.validate();
    return s;
}

namespace {

struct Runner {
    const EnvSchedule& s;
    const RateCache& harsh;
    const std::optional<RateCache>& mild;
    std::int64_t absorb;
    std::int64_t ceiling;
};

// Advances the chain over [t, end) with time-constant rates.  Returns false once absorbed or censored.
template <class Rates>
bool run_segment(Xoshiro256pp& rng, std::int64_t& n, double& t, double end, std::int64_t absorb, std::int64_t ceiling,
                 InhomTrajectory& out, Rates&& rates) {
    while (true) {
        double total, p_up;
        rates(n, total, p_up);
        if (!(total > 0)) {
            t = end;
            return true;
        }
        const double dt = rng.exponential(total);
        if (t + dt >= end) {
            t = end;
            return true;
        }
        t += dt;
        ++out.events;
        n += rng.uniform() < p_up ? 1 : -1;
        if (n <= absorb) {
            out.extinction_time = t;
            return false;
        }
        if (n > ceiling) {
            out.censored = true;
            return false;
        }
    }
}

InhomTrajectory simulate_one(const Runner& r, std::int64_t N0, std::int64_t K, std::uint64_t seed) {
    InhomTrajectory out;
    Xoshiro256pp rng(seed);
    std::int64_t n = N0;
    double t = 0;
    const auto& mild = r.s.mild;
    auto harsh_rates = [&](std::int64_t k, double& total, double& p_up) {
        total = r.harsh.total(k);
        p_up = r.harsh.p_up(k);
    };
    auto mild_phase = [&](double end) -> bool {
        if (!(end > t)) return true;
        switch (mild.kind) {
        case MildPhase::Kind::constant_birth:
            if (mild.lambda > 0) {
                const std::int64_t add = poisson(rng, mild.lambda * (end - t));
                out.events += add;
                n += add;
            }
            t = end;
            if (n > r.ceiling) {
                out.censored = true;
                return false;
            }
            return true;
        case MildPhase::Kind::yule:
            return run_segment(rng, n, t, end, r.absorb, r.ceiling, out, [&](std::int64_t k, double& total, double& p_up) {
                total = mild.lambda * double(k);
                p_up = 1;
            });
        case MildPhase::Kind::model:
            return run_segment(rng, n, t, end, r.absorb, r.ceiling, out, [&](std::int64_t k, double& total, double& p_up) {
                total = r.mild->total(k);
                p_up = r.mild->p_up(k);
            });
        }
        return true;
    };
    if (n <= r.absorb) {
        out.extinction_time = 0;
        out.extinction_epoch = K > 0 ? 1 : -1;
        out.final_state = n;
        return out;
    }
    for (std::int64_t k = 1; k <= K; ++k) {
        const auto& e = r.s.epochs[std::size_t(k - 1)];
        if (!mild_phase(e.a)) {
            if (!out.censored) {
                out.extinct_in_mild = true;
                out.extinction_epoch = k;
                out.state_at_epoch_end.push_back(n);
            }
            break;
        }
        const bool alive = run_segment(rng, n, t, e.a + e.t, r.absorb, r.ceiling, out, harsh_rates);
        if (out.censored) break;
        out.state_at_epoch_end.push_back(n);
        if (!alive) {
            out.extinction_epoch = k;
            break;
        }
    }
    out.final_state = n;
    return out;
}

std::int64_t cache_top(const EnvSchedule& s, std::int64_t N0) {
    std::int64_t top = std::max<std::int64_t>(4 * N0, 1024);
    for (auto x : s.thresholds) top = std::max(top, 4 * x);
    return std::min<std::int64_t>(top, 1 << 22);
}

} // namespace

InhomTrajectory simulate_inhomogeneous(const EnvSchedule& schedule, std::int64_t N0, std::int64_t epoch_horizon,
                                       std::uint64_t seed, const InhomOptions& opts) {
    schedule.validate();
    if (N0 < 1) throw std::invalid_argument("simulate_inhomogeneous: N0 must be >= 1");
    if (epoch_horizon < 0) throw std::invalid_argument("simulate_inhomogeneous: epoch_horizon must be >= 0");
    const std::int64_t K = std::min<std::int64_t>(epoch_horizon, std::int64_t(schedule.epochs.size()));
    const std::int64_t top = cache_top(schedule, N0);
    const RateCache harsh(schedule.harsh, top);
    std::optional<RateCache> mild;
    if (schedule.mild.kind == MildPhase::Kind::model) mild.emplace(*schedule.mild.model, top);
    const Runner r{schedule, harsh, mild, schedule.harsh.absorbing_level(), opts.ceiling};
    return simulate_one(r, N0, K, seed);
}

bool SurvivalEstimate::monotone() const {
    for (std::size_t k = 1; k < survivors.size(); ++k)
        if (survivors[k] > survivors[k - 1]) return false;
    return true;
}

void SurvivalEstimate::write_csv(std::ostream& os) const {
    CsvWriter w(os);
    w.header({"epoch", "survivors", "reps", "lo", "hi"});
    for (std::size_t k = 0; k < survivors.size(); ++k) {
        w.field(std::int64_t(k)).field(survivors[k]).field(reps).field(lo[k]).field(hi[k]);
        w.end_row();
    }
}

SurvivalEstimate run_schedule(const EnvSchedule& schedule, std::int64_t N0, std::int64_t epoch_count,
                              std::int64_t reps, std::uint64_t seed, const RunOptions& opts) {
    schedule.validate();
    if (N0 < 1) throw std::invalid_argument("run_schedule: N0 must be >= 1");
    if (reps < 1) throw std::invalid_argument("run_schedule: reps must be >= 1");
    if (epoch_count < 0) throw std::invalid_argument("run_schedule: epoch_count must be >= 0");
    if (epoch_count > std::int64_t(schedule.epochs.size()))
        throw std::invalid_argument("run_schedule: schedule has only " + std::to_string(schedule.epochs.size()) +
                                    " epochs");
    const std::int64_t K = epoch_count;
    const std::int64_t top = cache_top(schedule, N0);
    const RateCache harsh(schedule.harsh, top);
    std::optional<RateCache> mild;
    if (schedule.mild.kind == MildPhase::Kind::model) mild.emplace(*schedule.mild.model, top);
    const Runner r{schedule, harsh, mild, schedule.harsh.absorbing_level(), opts.ceiling};

    std::vector<std::int64_t> ext(std::size_t(reps), -1);
    std::vector<char> cens(std::size_t(reps), 0);
    parallel_for(reps, resolve_workers(opts.workers), [&](std::int64_t i) {
        const auto tr = simulate_one(r, N0, K, stream_seed(seed, std::uint64_t(i)));
        ext[std::size_t(i)] = tr.extinction_epoch;
        cens[std::size_t(i)] = tr.censored;
    });

    SurvivalEstimate est;
    est.horizon = K;
    est.reps = reps;
    est.seed = seed;
    est.threshold = opts.threshold;
    std::vector<std::int64_t> deaths(std::size_t(K + 1), 0);
    for (std::int64_t i = 0; i < reps; ++i) {
        if (ext[std::size_t(i)] > 0) ++deaths[std::size_t(ext[std::size_t(i)])];
        est.censored += cens[std::size_t(i)];
    }
    std::int64_t alive = reps;
    for (std::int64_t k = 0; k <= K; ++k) {
        alive -= deaths[std::size_t(k)];
        est.survivors.push_back(alive);
        const auto [lo, hi] = wilson_interval(alive, reps, opts.z);
        est.lo.push_back(lo);
        est.hi.push_back(hi);
    }
    est.survival_prob = double(est.survivors.back()) / double(reps);
    est.survival_lo = est.lo.back();
    est.survival_hi = est.hi.back();
    est.below_threshold = est.survival_prob < est.threshold;
    if (schedule.rule) {
        est.c = schedule.rule->c;
        est.beta = schedule.rule->beta;
    }
    return est;
}

SurvivalEstimate compmin_experiment(const RateModel& harsh, const MildPhase& mild, double c, double beta,
                                    std::int64_t epoch_count, std::int64_t reps, std::uint64_t seed,
                                    const CompminOptions& opts) {
    if (!(c > 0) || !(beta > 0)) throw std::invalid_argument("compmin_experiment: c and beta must be > 0");
    const auto rep = check_assumptions(harsh);
    if (!(rep.l_estimate <= 1e-2))
        throw ModelError("compmin_experiment: harsh model needs lambda/mu -> 0 (estimated limit " +
                         format_real(rep.l_estimate) + ")");
    if (!(rep.fitted_mu_index > 1))
        throw ModelError("compmin_experiment: harsh death rates need a regular-variation index > 1 (fitted " +
                         format_real(rep.fitted_mu_index) + ")");
    const auto schedule = make_schedule(harsh, mild, c, beta, epoch_count, opts.gap);
    auto est = run_schedule(schedule, opts.N0, epoch_count, reps, seed, opts);
    est.rho = rep.fitted_mu_index;
    est.c = c;
    est.beta = beta;
    est.extinction_predicted = beta < est.rho - 1;
    return est;
}

double default_eps(std::int64_t i) { return std::max(std::ldexp(1.0, int(-std::min<std::int64_t>(i, 1000) - 2)), 1e-12); }

double constant_birth_reach(double lambda, double g, std::int64_t x) {
    if (x <= 1) return 1;
    if (!(lambda * g > 0)) return 0;
    // 1 + Poisson(lambda g) >= x  <=>  Poisson >= x - 1
    return boost::math::gamma_p(double(x - 1), lambda * g);
}

double yule_reach(double lambda, double g, std::int64_t x) {
    if (x <= 1) return 1;
    // Z_g is geometric on {1, 2, ...} with success probability exp(-lambda g).
    return std::exp(double(x - 1) * std::log1p(-std::exp(-lambda * g)));
}

double constant_birth_gap(double lambda, std::int64_t x, double eps) {
    if (!(lambda > 0)) throw std::invalid_argument("constant_birth_gap: lambda must be > 0");
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("constant_birth_gap: eps must lie in (0, 1)");
    if (x <= 1) return 0;
    auto miss = [&](double g) { return boost::math::gamma_q(double(x - 1), lambda * g); };
    double lo = 0, hi = double(x) / lambda;
    while (miss(hi) > eps) {
        lo = hi;
        hi *= 2;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (miss(mid) > eps ? lo : hi) = mid;
    }
    return hi;
}

double yule_gap(double lambda, std::int64_t x, double eps) {
    if (!(lambda > 0)) throw std::invalid_argument("yule_gap: lambda must be > 0");
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("yule_gap: eps must lie in (0, 1)");
    if (x <= 1) return 0;
    const double q = -std::expm1(std::log1p(-eps) / double(x - 1));  // 1 - (1 - eps)^{1/(x-1)}
    return -std::log(q) / lambda;
}

namespace {

// P_N(T_0 <= t) at the given epoch lengths (+inf maps to 1), one streaming pass.
std::vector<double> extinction_cdf_at(const RateModel& harsh, std::int64_t N, const std::vector<double>& t) {
    std::vector<std::size_t> order(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t[a] < t[b]; });
    std::vector<double> finite;
    for (auto i : order)
        if (std::isfinite(t[i])) finite.push_back(t[i]);
    const auto P = hypoexp_cdf(pure_death_rates(harsh, N), finite);
    std::vector<double> out(t.size(), 1.0);
    std::size_t j = 0;
    for (auto i : order)
        if (std::isfinite(t[i])) out[i] = P[j++];
    return out;
}

} // namespace

std::vector<double> survival_bound(const RateModel& harsh, const std::vector<Epoch>& epochs, std::int64_t proxy_N) {
    if (!harsh.pure_death()) throw ModelError("survival_bound: needs a pure-death harsh model");
    std::vector<double> t;
    for (const auto& e : epochs) t.push_back(e.t);
    const auto P = extinction_cdf_at(harsh, proxy_N, t);
    std::vector<double> out{1.0};
    for (double p : P) out.push_back(out.back() * (1 - p));
    return out;
}

EnvSchedule counterexample_schedule(const RateModel& harsh, double c, double beta, std::int64_t epoch_count,
                                    const CounterexampleOptions& opts) {
    if (!harsh.pure_death()) throw ModelError("counterexample_schedule: harsh phase must be pure death");
    if (!(c > 0) || !(beta > 0)) throw std::invalid_argument("counterexample_schedule: c and beta must be > 0");
    if (epoch_count < 1) throw std::invalid_argument("counterexample_schedule: epoch_count must be >= 1");
    if (opts.infinity_proxy < 2) throw std::invalid_argument("counterexample_schedule: infinity proxy must be >= 2");
    double rho = harsh.claimed_rv_index().value_or(0);
    if (!(rho > 1)) rho = check_assumptions(harsh).fitted_mu_index;
    if (!(beta > rho - 1))
        throw std::invalid_argument("counterexample_schedule: needs beta > rho - 1 (rho = " + format_real(rho) + ")");

    const MildPhase mild = opts.yule ? MildPhase::yule(opts.lambda) : MildPhase::constant_birth(opts.lambda);
    if (!(opts.lambda > 0)) throw std::invalid_argument("counterexample_schedule: lambda must be > 0");
    const ScheduleRule rule{c, beta};
    const auto K = std::size_t(epoch_count);
    std::vector<double> t(K), eps(K);
    for (std::size_t i = 0; i < K; ++i) {
        t[i] = rule.t(std::int64_t(i) + 1);
        eps[i] = default_eps(std::int64_t(i) + 1);
    }

    // Thresholds are searched on a geometric ladder; the proxy level always qualifies.
    std::vector<std::int64_t> ladder;
    for (double v = 1; v < double(opts.infinity_proxy); v *= 1.25) {
        const auto x = std::int64_t(std::llround(v));
        if (ladder.empty() || x != ladder.back()) ladder.push_back(x);
    }
    if (ladder.back() != opts.infinity_proxy) ladder.push_back(opts.infinity_proxy);
    const auto P_inf = extinction_cdf_at(harsh, opts.infinity_proxy, t);
    std::vector<std::int64_t> x(K, opts.infinity_proxy);
    std::vector<char> done(K, 0);
    std::size_t remaining = K;
    for (auto level : ladder) {
        if (remaining == 0) break;
        std::vector<double> tt;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < K; ++i)
            if (!done[i]) {
                tt.push_back(t[i]);
                idx.push_back(i);
            }
        const auto P = level == opts.infinity_proxy ? std::vector<double>(tt.size(), 0.0) : extinction_cdf_at(harsh, level, tt);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const auto i = idx[j];
            if (level == opts.infinity_proxy || P[j] <= eps[i] + (1 - eps[i]) * P_inf[i]) {
                x[i] = level;
                done[i] = 1;
                --remaining;
            }
        }
    }

    EnvSchedule s{harsh, mild, {}, rule, x, eps, x[0]};
    double a = 0;
    for (std::size_t i = 0; i < K; ++i) {
        s.epochs.push_back({a, t[i]});
        if (i + 1 < K) {
            const double g = opts.yule ? yule_gap(opts.lambda, x[i + 1], eps[i]) : constant_birth_gap(opts.lambda, x[i + 1], eps[i]);
            a = a + t[i] + g;
        }
    }
    s.validate();
    return s;
}

} // namespace cdfi
