// One PASS/FAIL line per acceptance criterion.  Seeds are fixed per criterion (1000 + k).
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdfi/hypoexp.hpp"
#include "cdfi/io.hpp"
#include "cdfi/moments.hpp"
#include "cdfi/rates.hpp"
#include "cdfi/rng.hpp"
#include "cdfi/simulate.hpp"
#include "cdfi/stats.hpp"
#include "cdfi/transforms.hpp"
#include "cdfi/varenv.hpp"

using namespace cdfi;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [FAIL]");
    }
};

std::string r(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

int g_workers = 1;

std::uint64_t seed_of(int k) { return 1000 + std::uint64_t(k); }

RateModel n2_birth_n() { return RateModel::preset("power", {{"rho", 2}, {"gamma", 0}, {"c", 1}}); }
RateModel n2_pure() { return RateModel::preset("pure-death-power", {{"rho", 2}}); }

std::vector<double> hitting_sample(const Ensemble& e, std::int64_t n) {
    std::vector<double> out;
    for (const auto& rec : e.records)
        if (auto t = rec.T(n)) out.push_back(*t);
    return out;
}

// 1. exact m_n, Var tau_n, E tau_n^3 against simulated passage times.
void c1(Outcome& o) {
    const auto model = n2_birth_n();
    for (std::int64_t n : {10, 50}) {
        const auto s = simulate_tau(model, n, 100000, seed_of(1) + std::uint64_t(n), g_workers);
        const double m = tau_mean(model, n);
        const auto hm = tau_higher_moments(model, n);
        const double var = hm.second - m * m;
        const auto sm = sample_moments(s.tau);
        const auto [m3, se3] = raw_moment(s.tau, 3);
        o.require(std::abs(sm.mean - m) <= 3 * sm.se_mean,
                  "n=" + std::to_string(n) + " mean z=" + r((sm.mean - m) / sm.se_mean));
        o.require(std::abs(sm.var - var) <= 3 * sm.se_var, "var z=" + r((sm.var - var) / sm.se_var));
        o.require(std::abs(m3 - hm.third) <= 3 * se3, "E tau^3 z=" + r((m3 - hm.third) / se3));
        o.require(s.runaway == 0, "runaway=" + std::to_string(s.runaway));
    }
}

// 2. recursion residuals on levels 2..10^4 for three presets.
void c2(Outcome& o) {
    const std::vector<RateModel> models = {RateModel::preset("kingman"), n2_birth_n(), RateModel::preset("logistic")};
    for (const auto& model : models) {
        const auto table = AnalysisTable::build(model, 1, 10000);
        double worst_m = 0, worst_2 = 0;
        for (std::int64_t n = 2; n <= 10000; ++n) {
            worst_m = std::max(worst_m, table.m_recursion_residual(n));
            worst_2 = std::max(worst_2, table.second_moment_residual(n));
        }
        o.require(worst_m <= 1e-9 && worst_2 <= 1e-9,
                  std::string(model.name()) + " max residuals " + r(worst_m) + ", " + r(worst_2));
    }
}

// 3. LLN for Kingman at n = 100, N0 from the proxy check.
void c3(Outcome& o) {
    const auto model = RateModel::preset("kingman");
    const std::int64_t n = 100;
    const auto proxy = infinity_proxy_check(model, n, {400, 800, 1600, 3200}, 4000, seed_of(3), g_workers);
    o.require(proxy.stable, "proxy " + proxy.outcome + ", N0=" + std::to_string(proxy.recommended_N0));
    if (!proxy.stable) return;
    EnsemblePlan plan;
    plan.N0 = proxy.recommended_N0;
    plan.reps = 10000;
    plan.levels = {n};
    plan.stop_level = n;
    plan.entrance = Entrance::mean_offset;
    plan.keep_records = true;
    plan.master_seed = seed_of(3);
    plan.workers = g_workers;
    const auto T = hitting_sample(monte_carlo(model, plan), n);
    const auto c = lln_check(T, hitting_mean_from_infinity(model, n), {n, plan.reps, plan.master_seed});
    double sd = 0;
    for (const auto& [k, v] : c.details)
        if (k == "ratio_sd") sd = std::stod(v);
    o.require(c.passed, "|mean-1|=" + r(c.statistic) + " vs " + r(c.threshold));
    o.require(sd < 0.15, "ratio sd=" + r(sd));
}

// 4. regime II limit law for mu_n = 2^n.
void c4(Outcome& o) {
    const auto model = RateModel::preset("exponential", {{"beta", std::log(2.0)}});
    const std::int64_t n = 20;
    const double E = hitting_mean_from_infinity(model, n);
    EnsemblePlan plan;
    plan.N0 = 80;
    plan.reps = 10000;
    plan.levels = {n};
    plan.stop_level = n;
    plan.entrance = Entrance::mean_offset;
    plan.keep_records = true;
    plan.master_seed = seed_of(4);
    plan.workers = g_workers;
    const auto T = hitting_sample(monte_carlo(model, plan), n);
    for (double a : {0.5, 1.0, 2.0}) {
        std::vector<double> e;
        for (double t : T) e.push_back(std::exp(-a * t / E));
        const auto m = sample_moments(e);
        const double exact = limit_Z_transform(0.0, 0.5, a);
        o.require(std::abs(m.mean - exact) <= 3 * m.se_mean, "a=" + r(a) + " z=" + r((m.mean - exact) / m.se_mean));
    }
}

// 5. l = 0 fixed point is 1/(1+a); -G'(0) = 1.
void c5(Outcome& o) {
    const auto grid = linear_grid(0.2, 10.0, 50);
    const auto law = limit_law_fixed_point(0.0, 0.5, grid);
    double worst = 0;
    for (const auto& [a, G] : law.grid) worst = std::max(worst, std::abs(G - 1 / (1 + a)));
    o.require(worst <= 1e-10, "max |G - 1/(1+a)| = " + r(worst));
    const double h = 1e-4;
    const double d = -(-3 * limit_law_G(0, 0.5, 0) + 4 * limit_law_G(0, 0.5, h) - limit_law_G(0, 0.5, 2 * h)) / (2 * h);
    o.require(std::abs(d - 1) <= 1e-6, "-G'(0) = " + r(d) + " (err " + r(std::abs(d - 1)) + ")");
}

// 6. CLT for T_n, mu_n = n^2, n = 100.
void c6(Outcome& o) {
    const auto model = n2_pure();
    const std::int64_t n = 100;
    const auto table = AnalysisTable::build(model, n, 2 * n);
    EnsemblePlan plan;
    plan.N0 = 2000;
    plan.reps = 20000;
    plan.levels = {n};
    plan.stop_level = n;
    plan.entrance = Entrance::mean_offset;
    plan.keep_records = true;
    plan.master_seed = seed_of(6);
    plan.workers = g_workers;
    const auto T = hitting_sample(monte_carlo(model, plan), n);
    const auto& row = table.at(n);
    const auto c = clt_check_T(T, row.E_inf_T, row.var_T, {n, plan.reps, plan.master_seed}, clt_hypotheses(table).holds);
    o.require(c.passed && !c.informative, "KS=" + r(c.statistic) + " vs critical " + r(c.threshold) +
                                              (c.informative ? " (informative)" : ""));
}

// 7. Kingman speed of descent, t X(t) -> 2.
void c7(Outcome& o) {
    const auto model = RateModel::preset("kingman");
    EnsemblePlan plan;
    plan.N0 = 20000;
    plan.reps = 1000;
    plan.observation_times = {1e-3, 3e-3, 1e-2};
    plan.t_max = 1e-2;
    plan.entrance = Entrance::mean_offset;
    plan.keep_records = true;
    plan.master_seed = seed_of(7);
    plan.workers = g_workers;
    const auto ens = monte_carlo(model, plan);
    for (std::size_t j = 0; j < plan.observation_times.size(); ++j) {
        const double t = plan.observation_times[j];
        double s = 0;
        std::int64_t c = 0;
        for (const auto& rec : ens.records)
            if (rec.observed_states[j] >= 0) {
                s += t * double(rec.observed_states[j]);
                ++c;
            }
        const double m = s / double(c);
        o.require(c == plan.reps && m >= 1.9 && m <= 2.1, "t=" + r(t) + " mean tX=" + r(m));
    }
}

// 8. CLT for X(t) at v(t) ~ 10^3, mu_n = n^2.
void c8(Outcome& o) {
    const auto model = n2_pure();
    SpeedFunction v(model);
    const double t = v.E_inf_T(1000);
    EnsemblePlan plan;
    plan.N0 = 10000;
    plan.reps = 20000;
    plan.observation_times = {t};
    plan.t_max = t;
    plan.entrance = Entrance::mean_offset;
    plan.keep_records = true;
    plan.master_seed = seed_of(8);
    plan.workers = g_workers;
    const auto ens = monte_carlo(model, plan);
    const auto checks = clt_check_X(ens.records, v, 2.0, {-1, plan.reps, plan.master_seed});
    const auto& c = checks.front();
    o.require(c.passed && !c.informative, "v=" + std::to_string(v(t)) + " KS=" + r(c.statistic) + " vs critical " +
                                              r(c.threshold));
}

// 9. small-time tail index from the exact law.
void c9(Outcome& o) {
    for (double rho : {2.0, 3.0}) {
        const auto model = RateModel::preset("pure-death-power", {{"rho", rho}});
        const auto [lo, hi] = suggest_tail_grid(model, 400);
        const auto grid = log_grid(lo, hi, 20);
        TailOptions opts;
        opts.N0 = 400;
        const auto c = tail_index_check(model, TailMethod::exact_hypoexp, grid, opts);
        double slope = 0;
        for (const auto& [k, val] : c.details)
            if (k == "slope") slope = std::stod(val);
        o.require(c.passed, "rho=" + r(rho) + " slope=" + r(slope) + " expected " + r(1 / (1 - rho)));
    }
}

// 10. exact extinction law vs Monte Carlo, mu_n = n^2 from 50.
void c10(Outcome& o) {
    const auto model = n2_pure();
    const std::vector<double> grid = {0.5, 1.0, 1.5, 2.0, 3.0};
    const auto exact = hypoexp_cdf(pure_death_rates(model, 50), grid);
    const auto mc = estimate_extinction_cdf(model, 50, grid, 100000, seed_of(10), g_workers, 3.0);
    for (std::size_t i = 0; i < grid.size(); ++i)
        o.require(exact[i] >= mc[i].lo && exact[i] <= mc[i].hi,
                  "t=" + r(grid[i]) + " exact " + r(exact[i]) + " in [" + r(mc[i].lo) + ", " + r(mc[i].hi) + "]");
}

// 11. survival under a varying environment.
void c11(Outcome& o) {
    const auto harsh = n2_pure();
    CompminOptions co;
    co.N0 = 100;
    co.gap = 1.0;
    co.workers = g_workers;
    const auto a = compmin_experiment(harsh, MildPhase::constant_birth(100), 1.0, 0.5, 1000, 1000, seed_of(11), co);
    o.require(a.monotone() && a.survivors.back() < a.survivors.front(), "beta=0.5 curve monotone decreasing");
    o.require(a.survival_prob < 0.05, "beta=0.5 survival at 1000 epochs " + r(a.survival_prob));

    const auto s = counterexample_schedule(harsh, 0.5, 2.0, 1000);
    RunOptions ro;
    ro.workers = g_workers;
    const auto b = run_schedule(s, s.initial_state, 1000, 1000, seed_of(11) + 1, ro);
    o.require(b.survival_prob >= 0.2, "beta=2 counterexample survival " + r(b.survival_prob) + " (x_1=" +
                                          std::to_string(s.initial_state) + ")");
}

// 12. byte-identical ensembles across worker counts.
void c12(Outcome& o) {
    auto render = [](int workers) {
        std::ostringstream os;
        EnsemblePlan plan;
        plan.N0 = 300;
        plan.reps = 2000;
        plan.levels = {10, 50, 100};
        plan.t_grid = {0.5, 1.0, 2.0};
        plan.observation_times = {0.05, 0.2};
        plan.laplace_points = {1.0};
        plan.master_seed = seed_of(12);
        plan.workers = workers;
        plan.keep_records = true;
        const auto e = monte_carlo(n2_birth_n(), plan);
        e.summary.write_levels_csv(os);
        e.summary.write_transform_csv(os);
        e.summary.write_cdf_csv(os);
        write_trajectories_csv(os, e.records);
        const auto tau = simulate_tau(n2_birth_n(), 10, 2000, seed_of(12), workers);
        for (double t : tau.tau) os << format_real(t) << '\n';
        const auto sched = make_schedule(n2_pure(), MildPhase::constant_birth(50), 1.0, 0.5, 50, 1.0);
        RunOptions ro;
        ro.workers = workers;
        run_schedule(sched, 50, 50, 500, seed_of(12), ro).write_csv(os);
        return os.str();
    };
    const auto base = render(1);
    for (int w : {2, 3, 4}) o.require(render(w) == base, "workers=" + std::to_string(w) + " identical to workers=1");
    o.require(!base.empty(), "digest " + hex64(fnv1a(base)));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "run a single criterion (1-12)")->check(CLI::Range(0, 12));
    app.add_option("--workers", g_workers, "worker threads")->check(CLI::Range(1, 256));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<void(Outcome&)>> all = {c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12};
    bool ok = true;
    for (int k = 1; k <= 12; ++k) {
        if (only && k != only) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            all[std::size_t(k - 1)](o);
        } catch (const std::exception& e) {
            o.require(false, std::string("error: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << " (" << r(secs) << " s) "
                  << o.detail.str() << std::endl;
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
