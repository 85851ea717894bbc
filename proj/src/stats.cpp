#include "cdfi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "cdfi/detail/logmath.hpp"
#include "cdfi/error.hpp"
#include "cdfi/hypoexp.hpp"
#include "cdfi/io.hpp"
#include "cdfi/rng.hpp"

namespace cdfi {

using detail::kNaN;

CheckResult& CheckResult::detail(const std::string& key, double value) { return detail(key, format_real(value)); }

CheckResult& CheckResult::detail(const std::string& key, const std::string& value) {
    details.emplace_back(key, value);
    return *this;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_statistic(std::vector<double> s, const std::function<double(double)>& cdf) {
    if (s.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(s.begin(), s.end());
    const double n = double(s.size());
    double d = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double F = cdf(s[i]);
        d = std::max({d, double(i + 1) / n - F, F - double(i) / n});
    }
    return d;
}

double ks_statistic_lattice(std::vector<std::int64_t> s, const std::function<double(double)>& cdf) {
    if (s.empty()) throw std::invalid_argument("ks_statistic_lattice: empty sample");
    std::sort(s.begin(), s.end());
    const double n = double(s.size());
    double d = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        const double x = double(s[i]);
        d = std::max({d, std::abs(double(i) / n - cdf(x - 0.5)), std::abs(double(j) / n - cdf(x + 0.5))});
        i = j;
    }
    return d;
}

double ks_critical(std::int64_t n, double alpha) {
    const double c = std::sqrt(-0.5 * std::log(alpha / 2));
    const double sn = std::sqrt(double(n));
    return c / (sn + 0.12 + 0.11 / sn);
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / double(a.size()) - double(j) / double(b.size())));
    }
    return d;
}

double ks_two_sample_critical(std::int64_t n, std::int64_t m, double alpha) {
    return std::sqrt(-0.5 * std::log(alpha / 2)) * std::sqrt(double(n + m) / (double(n) * double(m)));
}

std::pair<double, double> wilson_interval(std::int64_t hits, std::int64_t n, double z) {
    if (n <= 0) return {0.0, 1.0};
    const double nn = double(n), p = double(hits) / nn, z2 = z * z;
    const double denom = 1 + z2 / nn;
    const double center = (p + z2 / (2 * nn)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

SampleMoments sample_moments(std::span<const double> x) {
    SampleMoments m;
    m.count = std::int64_t(x.size());
    if (x.empty()) return m;
    const double n = double(x.size());
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double s2 = 0, s4 = 0;
    for (double v : x) {
        const double d = (v - m.mean) * (v - m.mean);
        s2 += d;
        s4 += d * d;
    }
    m.var = x.size() > 1 ? s2 / (n - 1) : 0.0;
    m.se_mean = std::sqrt(m.var / n);
    const double m4 = s4 / n, m2 = s2 / n;
    m.se_var = std::sqrt(std::max(0.0, (m4 - m2 * m2) / n));
    return m;
}

std::pair<double, double> raw_moment(std::span<const double> x, int k) {
    std::vector<double> p;
    p.reserve(x.size());
    for (double v : x) p.push_back(std::pow(v, k));
    const auto m = sample_moments(p);
    return {m.mean, m.se_mean};
}

static CheckResult make(const std::string& name, const CheckContext& ctx, std::int64_t size) {
    CheckResult c;
    c.name = name;
    c.n = ctx.n;
    c.reps = ctx.reps > 0 ? ctx.reps : size;
    c.seed = ctx.seed;
    c.sample_size = size;
    return c;
}

CheckResult lln_check(std::span<const double> samples, double exact_E, const CheckContext& ctx) {
    if (samples.size() < 1000) throw std::invalid_argument("lln_check: need at least 1000 samples");
    if (!std::isfinite(exact_E) || !(exact_E > 0)) throw std::invalid_argument("lln_check: exact mean must be finite");
    std::vector<double> ratio;
    for (double t : samples) ratio.push_back(t / exact_E);
    const auto m = sample_moments(ratio);
    auto c = make("lln", ctx, m.count);
    c.statistic = std::abs(m.mean - 1);
    c.threshold = 3 * std::sqrt(m.var) / std::sqrt(double(m.count));
    c.detail("direction", "|mean(T/E) - 1| <= 3 sd/sqrt(reps)");
    c.detail("mean_ratio", m.mean).detail("ratio_sd", std::sqrt(m.var)).detail("exact_E", exact_E);
    return c.decide();
}

CheckResult clt_check_T(std::span<const double> samples, double mean, double var, const CheckContext& ctx,
                        bool hypotheses_ok) {
    if (samples.size() < 10000) throw std::invalid_argument("clt_check_T: need at least 10^4 samples");
    if (!(var > 0)) throw std::invalid_argument("clt_check_T: exact variance must be > 0");
    const double sd = std::sqrt(var);
    std::vector<double> z;
    for (double t : samples) z.push_back((t - mean) / sd);
    auto c = make("clt-T", ctx, std::int64_t(z.size()));
    const auto zm = sample_moments(z);
    c.statistic = ks_statistic(z, normal_cdf);
    c.threshold = ks_critical(std::int64_t(z.size()), 0.01);
    c.informative = !hypotheses_ok;
    c.detail("direction", "KS(standardized T_n, N(0,1)) <= 1% critical value");
    c.detail("exact_mean", mean).detail("exact_var", var).detail("z_mean", zm.mean).detail("z_var", zm.var);
    if (!hypotheses_ok) c.detail("note", "CLT hypotheses not confirmed on the table window; informative only");
    return c.decide();
}

CltHypotheses clt_hypotheses(const AnalysisTable& table) {
    const auto& a = table.rows().front();
    const auto& b = table.rows().back();
    CltHypotheses h;
    h.variance_ratio_first = a.var_tau / a.var_T;
    h.variance_ratio_last = b.var_tau / b.var_T;
    h.third_ratio_first = a.third_sum / std::pow(a.var_T, 1.5);
    h.third_ratio_last = b.third_sum / std::pow(b.var_T, 1.5);
    h.holds = h.variance_ratio_last < h.variance_ratio_first && h.third_ratio_last < h.third_ratio_first;
    return h;
}

std::vector<CheckResult> clt_check_X(const std::vector<TrajectoryRecord>& records, SpeedFunction& v, double rho,
                                     const CheckContext& ctx) {
    if (records.empty()) throw std::invalid_argument("clt_check_X: no trajectories");
    if (!(rho > 1)) throw std::invalid_argument("clt_check_X: needs a regular-variation index rho > 1");
    std::vector<CheckResult> out;
    const auto& times = records.front().observation_times;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double vt = double(v(times[j]));
        std::vector<std::int64_t> xs;
        for (const auto& r : records)
            if (r.observed_states[j] >= 0) xs.push_back(r.observed_states[j]);
        auto c = make("clt-X", ctx, std::int64_t(xs.size()));
        c.n = std::int64_t(vt);
        const double scale = std::sqrt((2 * rho - 1) * vt);
        c.statistic = ks_statistic_lattice(xs, [&](double x) { return normal_cdf(scale * (x / vt - 1)); });
        c.threshold = ks_critical(std::int64_t(xs.size()), 0.01);
        c.detail("direction", "KS(sqrt((2rho-1)v)(X/v-1), N(0,1)) <= 1% critical value, lattice-corrected");
        c.detail("t", times[j]).detail("v", vt).detail("rho", rho);
        if (vt < 30) {
            c.informative = true;
            c.detail("note", "v(t) < 30: asymptotic regime not reached, unreliable");
        }
        out.push_back(c.decide());
    }
    return out;
}

std::vector<CheckResult> speed_ratio_check(const std::vector<TrajectoryRecord>& records, SpeedFunction& v,
                                           const CheckContext& ctx) {
    if (records.empty()) throw std::invalid_argument("speed_ratio_check: no trajectories");
    std::vector<CheckResult> out;
    const auto& times = records.front().observation_times;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double vt = double(v(times[j]));
        std::vector<double> ratio;
        for (const auto& r : records)
            if (r.observed_states[j] >= 0) ratio.push_back(double(r.observed_states[j]) / vt);
        const auto m = sample_moments(ratio);
        auto c = make("speed-ratio", ctx, m.count);
        c.n = std::int64_t(vt);
        c.statistic = std::abs(m.mean - 1);
        c.threshold = 3 * m.se_mean;
        c.detail("direction", "|mean(X(t)/v(t)) - 1| <= 3 se");
        c.detail("t", times[j]).detail("v", vt).detail("mean_ratio", m.mean);
        out.push_back(c.decide());
    }
    return out;
}

std::pair<double, double> suggest_tail_grid(const RateModel& model, std::int64_t N0, double p_lo, double p_hi) {
    const auto rates = pure_death_rates(model, N0);
    double E = 0;
    for (double r : rates) E += 1 / r;
    double lo_t = E * 1e-3;
    for (int i = 0; i < 6 && hypoexp_cdf(rates, lo_t) >= p_lo; ++i) lo_t /= 10;
    for (double u = E * 0.05; u <= E * 4; u *= 2) {
        const auto ts = log_grid(lo_t, u, 400);
        const auto P = hypoexp_cdf(rates, ts);
        if (P.back() <= p_hi) continue;
        double a = detail::kNaN, b = detail::kNaN;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            if (std::isnan(a) && P[i] >= p_lo) a = ts[i];
            if (P[i] <= p_hi) b = ts[i];
        }
        if (!(a < b)) break;
        return {a, b};
    }
    throw GridRejected("suggest_tail_grid: could not bracket the small-time window", kNaN, kNaN);
}

CheckResult tail_index_check(const RateModel& model, TailMethod method, std::span<const double> t_grid,
                             const TailOptions& opts) {
    if (t_grid.size() < 5) throw std::invalid_argument("tail_index_check: need at least 5 grid points");
    double expected = 0;
    if (opts.expected_slope) {
        expected = *opts.expected_slope;
    } else {
        const auto rho = model.claimed_rv_index();
        if (!rho || *rho <= 1) throw ModelError("tail_index_check: model has no regular-variation index > 1");
        expected = 1 / (1 - *rho);
    }
    std::vector<double> x, y, t(t_grid.begin(), t_grid.end()), P;
    CheckContext ctx;
    ctx.n = opts.N0;
    std::int64_t size = 0;
    if (method == TailMethod::exact_hypoexp) {
        if (!model.pure_death()) throw ModelError("tail_index_check: exact method needs a pure-death model");
        P = hypoexp_cdf(pure_death_rates(model, opts.N0), t);
        for (double p : P)
            if (!(p >= opts.p_lo && p <= opts.p_hi)) {
                double a = kNaN, b = kNaN;
                std::string hint;
                try {
                    std::tie(a, b) = suggest_tail_grid(model, opts.N0, opts.p_lo, opts.p_hi);
                    hint = "; suggested range [" + format_real(a) + ", " + format_real(b) + "]";
                } catch (const GridRejected&) {
                }
                throw GridRejected("tail_index_check: grid leaves the window P in [" + format_real(opts.p_lo) + ", " +
                                       format_real(opts.p_hi) + "] (got " + format_real(p) + ")" + hint,
                                   a, b);
            }
        size = std::int64_t(t.size());
    } else {
        ctx.reps = opts.reps;
        ctx.seed = opts.seed;
        const auto cdf = estimate_extinction_cdf(model, opts.N0, t, opts.reps, opts.seed, opts.workers);
        std::vector<double> keep_t;
        for (const auto& c : cdf)
            if (c.hits > 0 && c.hits < c.reps) {
                keep_t.push_back(c.t);
                P.push_back(c.estimate);
            }
        if (keep_t.size() < 5) throw GridRejected("tail_index_check: fewer than 5 grid points with 0 < P < 1", kNaN, kNaN);
        t = keep_t;
        size = opts.reps;
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
        x.push_back(std::log(t[i]));
        y.push_back(std::log(-std::log(P[i])));
    }
    const auto fit = detail::fit_line(x, y);
    auto c = make(method == TailMethod::exact_hypoexp ? "tail-exact" : "tail-mc", ctx, size);
    c.statistic = std::abs(fit.slope / expected - 1);
    c.threshold = opts.tolerance;
    c.detail("direction", "|slope/expected - 1| <= tolerance");
    c.detail("slope", fit.slope).detail("expected", expected).detail("t_min", t.front()).detail("t_max", t.back());
    c.detail("P_min", *std::min_element(P.begin(), P.end())).detail("P_max", *std::max_element(P.begin(), P.end()));
    c.detail("N0", double(opts.N0)).detail("points", double(t.size()));
    return c.decide();
}

double exp_moment_pure_death(const RateModel& model, double a, std::int64_t k, std::int64_t k_a) {
    double lp = 0;
    for (std::int64_t i = k_a + 1; i <= k; ++i) {
        const double mu = model.death(i);
        if (a >= mu) return detail::kInf;
        lp -= std::log1p(-a / mu);
    }
    return std::exp(lp);
}

CheckResult exp_moment_estimate(const RateModel& model, double a, std::int64_t k, std::int64_t k_a, std::int64_t reps,
                                std::uint64_t seed, int workers) {
    if (!(a >= 0)) throw std::invalid_argument("exp_moment_estimate: a must be >= 0");
    if (k < k_a || k_a < model.absorbing_level()) throw std::invalid_argument("exp_moment_estimate: need k >= k_a >= floor");
    CheckContext ctx{k_a, reps, seed};
    auto c = make("expmoment", ctx, reps);
    c.detail("direction", "relative growth of E_k[exp(a T_ka)] over the last doubling of k <= threshold");
    c.detail("a", a).detail("k_a", double(k_a));
    if (a == 0) {
        c.statistic = 0;
        c.threshold = 0;
        c.detail("estimate", 1.0);
        return c.decide();
    }
    std::vector<double> est, se;
    bool unreliable = false;
    for (int j = 0; j < 4; ++j) {
        const std::int64_t kk = k << j;
        EnsemblePlan plan;
        plan.N0 = kk;
        plan.reps = reps;
        plan.levels = {k_a};
        plan.stop_level = k_a;
        plan.workers = workers;
        plan.master_seed = stream_seed(seed, std::uint64_t(j));
        plan.keep_records = true;
        const auto ens = monte_carlo(model, plan);
        std::vector<double> e;
        for (const auto& r : ens.records)
            if (auto T = r.T(k_a)) e.push_back(std::exp(a * *T));
            else unreliable = true;
        const auto m = sample_moments(e);
        est.push_back(m.mean);
        se.push_back(m.se_mean);
        if (!std::isfinite(m.mean) || !(m.se_mean < 0.5 * m.mean)) unreliable = true;
        c.detail("estimate_k" + std::to_string(kk), m.mean).detail("se_k" + std::to_string(kk), m.se_mean);
        if (model.pure_death()) c.detail("exact_k" + std::to_string(kk), exp_moment_pure_death(model, a, kk, k_a));
    }
    c.statistic = (est[3] - est[2]) / est[2];
    c.threshold = 0.02 + 3 * std::hypot(se[3] / est[3], se[2] / est[2]);
    c.detail("trend", c.statistic <= c.threshold ? "flat" : "unbounded trend");
    if (unreliable) {
        c.informative = true;
        c.detail("note", "estimator variance explodes or runs censored; unreliable");
    }
    return c.decide();
}

SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 5) throw std::invalid_argument("loglog_slope: need >= 5 paired points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw std::invalid_argument("loglog_slope: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const auto f = detail::fit_line(lx, ly);
    if (std::isnan(f.slope)) throw std::invalid_argument("loglog_slope: degenerate x (all equal)");
    return {f.slope, f.intercept, f.rms_residual};
}

void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& checks) {
    CsvWriter w(os);
    w.header({"check", "statistic", "threshold", "passed", "n", "reps", "seed"});
    for (const auto& c : checks) {
        w.field(c.name).field(c.statistic).field(c.threshold).field(c.passed).field(c.n).field(c.reps).field(c.seed);
        w.end_row();
    }
}

std::string checks_to_json(const std::vector<CheckResult>& checks) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
        nlohmann::ordered_json j;
        j["check"] = c.name;
        j["statistic"] = c.statistic;
        j["threshold"] = c.threshold;
        j["passed"] = c.passed;
        j["informative"] = c.informative;
        j["sample_size"] = c.sample_size;
        j["n"] = c.n;
        j["reps"] = c.reps;
        j["seed"] = c.seed;
        nlohmann::ordered_json d = nlohmann::ordered_json::object();
        for (const auto& [k, v] : c.details) d[k] = v;
        j["details"] = d;
        arr.push_back(j);
    }
    return arr.dump(2);
}

} // namespace cdfi
