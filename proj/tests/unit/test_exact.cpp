#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "cdfi/error.hpp"
#include "cdfi/excursion.hpp"
#include "cdfi/hypoexp.hpp"
#include "cdfi/moments.hpp"
#include "cdfi/regime.hpp"
#include "cdfi/regvar.hpp"
#include "cdfi/transforms.hpp"

using namespace cdfi;
using std::numbers::pi;

namespace {

RateModel kingman() { return RateModel::preset("kingman"); }
RateModel n2() { return RateModel::preset("pure-death-power", {{"rho", 2}}); }
RateModel n2_birth_n() { return RateModel::preset("power", {{"rho", 2}, {"gamma", 0}, {"c", 1}}); }
RateModel pow2() { return RateModel::preset("exponential", {{"beta", std::log(2.0)}}); }

} // namespace

TEST_CASE("tau_mean") {
    CHECK(tau_mean(kingman(), 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tau_mean(n2(), 3) == doctest::Approx(1.0 / 16).epsilon(1e-12));
    const auto lin = RateModel::preset("custom", {{"birth_coef", 1}, {"birth_exp", 1}, {"death_coef", 2}, {"death_exp", 1}});
    // series oracle: sum_{i>=1} (1/(2(i+1))) 2^{-(i-1)}
    double series = 0;
    for (int i = 1; i < 200; ++i) series += 1.0 / (2.0 * (i + 1)) * std::pow(0.5, i - 1);
    CHECK(tau_mean(lin, 1) == doctest::Approx(series).epsilon(1e-11));
    CHECK(tau_mean(lin, 1) == doctest::Approx(2 * std::log(2.0) - 1).epsilon(1e-11));
    const auto super = RateModel::preset("custom", {{"birth_coef", 2}, {"birth_exp", 1}, {"death_coef", 1}, {"death_exp", 1}});
    CHECK_THROWS_AS(tau_mean(super, 5), ConvergenceError);
}

TEST_CASE("hitting_mean_from_infinity") {
    for (std::int64_t n : {1, 7, 100, 2000}) CHECK(hitting_mean_from_infinity(kingman(), n) == doctest::Approx(2.0 / double(n)).epsilon(1e-9));
    CHECK(hitting_mean_from_infinity(n2(), 1) == doctest::Approx(pi * pi / 6 - 1).epsilon(1e-9));
    for (std::int64_t n : {1, 10, 20, 40}) CHECK(hitting_mean_from_infinity(pow2(), n) == doctest::Approx(std::ldexp(1.0, -int(n))).epsilon(1e-9));
    CHECK_THROWS_AS(hitting_mean_from_infinity(RateModel::preset("custom", {{"death_exp", 1}}), 1), ConvergenceError);
}

TEST_CASE("higher moments of tau") {
    for (std::int64_t n : {1, 5, 50}) {
        const double mu = n2().death(n + 1);
        const auto h = tau_higher_moments(n2(), n);
        CHECK(h.second == doctest::Approx(2 / (mu * mu)).epsilon(1e-9));
        CHECK(h.third == doctest::Approx(6 / (mu * mu * mu)).epsilon(1e-9));
    }
    const std::int64_t n = 2000;
    const double mu = n2_birth_n().death(n + 1);
    CHECK(mu * mu * tau_higher_moments(n2_birth_n(), n).second == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("variance of T_n from infinity") {
    double oracle = 0;
    for (int k = 10; k < 200000; ++k) oracle += std::pow(double(k + 1), -4);
    oracle += 1.0 / (3 * std::pow(200000.5, 3));
    CHECK(var_T_from_infinity(n2(), 10) == doctest::Approx(oracle).epsilon(1e-8));
    CHECK(var_T_from_infinity(kingman(), 1) == doctest::Approx(4 * (pi * pi / 3 - 3)).epsilon(1e-8));
    CHECK(4 * (pi * pi / 3 - 3) == doctest::Approx(1.15947).epsilon(1e-5));
    const auto t = AnalysisTable::build(n2_birth_n(), 5, 60);
    for (std::int64_t k = 5; k < 60; ++k)
        CHECK(t.at(k).var_T - t.at(k + 1).var_T == doctest::Approx(t.at(k).var_tau).epsilon(1e-7));
}

TEST_CASE("analysis table invariants") {
    for (const auto& m : {kingman(), n2_birth_n(), RateModel::preset("logistic"), pow2()}) {
        const auto t = AnalysisTable::build(m, 1, 400);
        const auto& rows = t.rows();
        double tail = 0;
        for (auto it = rows.rbegin(); it != rows.rend(); ++it) tail += it->m;
        CHECK(t.S() == doctest::Approx(t.at(1).E_inf_T).epsilon(1e-9));
        CHECK(rows.front().E_inf_T - tail == doctest::Approx(rows.back().E_inf_T - rows.back().m).epsilon(1e-6));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            CHECK(r.m > 0);
            CHECK(r.r > 0);
            CHECK(r.r <= 1 + 1e-12);
            if (i > 0) CHECK(r.E_inf_T < rows[i - 1].E_inf_T);
            const double mu = m.death(r.n + 1);
            CHECK(r.m >= (1 / mu) * (1 - 1e-12));
            CHECK(r.second >= (2 / (mu * mu)) * (1 - 1e-12));
            CHECK(r.third >= (6 / (mu * mu * mu)) * (1 - 1e-12));
            CHECK(r.second >= r.m * r.m);
            if (r.n >= 2) {
                CHECK(t.m_recursion_residual(r.n) <= 1e-9);
                CHECK(t.second_moment_residual(r.n) <= 1e-9);
            }
        }
    }
    std::ostringstream os;
    AnalysisTable::build(kingman(), 1, 3).write_csv(os);
    CHECK(os.str().rfind("n,log_pi,m_n,E_inf_T,var_tau,var_T,r_n\n", 0) == 0);
}

TEST_CASE("speed function") {
    SpeedFunction v(kingman());
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-4, std::log10(1.99));
    for (int i = 0; i < 100; ++i) {
        const double t = std::pow(10.0, u(gen));
        const auto n = v(t);
        CHECK(n == std::int64_t(std::ceil(2 / t)));
        CHECK(v.E_inf_T(n) <= t);
        if (n > 1) CHECK(t < v.E_inf_T(n - 1));
    }
    for (std::int64_t n : {1, 2, 17, 500}) CHECK(v(v.E_inf_T(n)) == n);
    CHECK(v(5.0) == 1);
    SpeedFunction w(n2());
    CHECK(double(w(1e-4)) * 1e-4 == doctest::Approx(1.0).epsilon(0.01));
    SpeedFunction c(RateModel::preset("pure-death-power", {{"rho", 3}}));
    CHECK(double(c(1e-6)) * std::sqrt(2e-6) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("regime classification") {
    const auto f = regime(RateModel::preset("factorial", {{"gamma", 1}}), 20, 200);
    CHECK(f.regime == Regime::II);
    CHECK(f.alpha_estimate == doctest::Approx(1.0).epsilon(0.02));
    const auto e = regime(RateModel::preset("exponential", {{"beta", 0.7}}), 20, 200);
    CHECK(e.regime == Regime::II);
    CHECK(e.alpha_estimate == doctest::Approx(1 - std::exp(-0.7)).epsilon(1e-6));
    const auto a = regime(RateModel::preset("alternating"), 20, 200);
    CHECK(a.regime == Regime::oscillating);
    REQUIRE(a.subsequence_limits.size() == 2);
    std::vector<double> lim = a.subsequence_limits;
    std::sort(lim.begin(), lim.end());
    CHECK(lim[0] == doctest::Approx(4.0 / 9).epsilon(1e-6));
    CHECK(lim[1] == doctest::Approx(4.0 / 5).epsilon(1e-6));
    // parity by direct summation: even levels carry 4/5
    const auto t = AnalysisTable::build(RateModel::preset("alternating"), 40, 41);
    CHECK(t.at(40).r == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(t.at(41).r == doctest::Approx(4.0 / 9).epsilon(1e-9));
    const auto k = regime(kingman(), 100, 10000);
    CHECK(k.regime == Regime::I);
    CHECK(k.sum_r_squared == SeriesDiagnostic::convergent);
    const auto m = regime(RateModel::preset("marginal"), 100, 5000);
    CHECK(m.regime == Regime::I);
    CHECK(m.sum_r_squared != SeriesDiagnostic::convergent);
    CHECK(k.to_json().find("\"regime\"") != std::string::npos);
}

TEST_CASE("Laplace transform of tau_n") {
    for (double a : {0.1, 1.0, 10.0}) CHECK(laplace_G(n2(), 4, a) == doctest::Approx(25 / (25 + a)).epsilon(1e-12));
    const auto m = n2_birth_n();
    for (std::int64_t n : {1, 5, 30}) {
        for (double a : {0.01, 0.5, 3.0}) {
            const double g0 = laplace_G(m, n - 1 > 0 ? n - 1 : 0, a);
            const double g1 = laplace_G(m, n, a);
            if (n > 1) {
                const double lam = m.birth(n), mu = m.death(n);
                CHECK(g0 == doctest::Approx(mu / (a + mu + lam * (1 - g1))).epsilon(1e-10));
            }
            CHECK(g1 >= 1 - a * tau_mean(m, n) - 1e-12);
        }
        const double h = 1e-6;
        CHECK((1 - laplace_G(m, n, h)) / h == doctest::Approx(tau_mean(m, n)).epsilon(1e-4));
    }
    CHECK_THROWS_AS(laplace_G(m, 3, -1.0), std::invalid_argument);
}

TEST_CASE("Laplace transform of the extinction time") {
    // prod n^2/(n^2 + a) = pi sqrt(a) / sinh(pi sqrt(a))
    for (double a : {0.1, 1.0, 25.0, 400.0}) {
        const double s = pi * std::sqrt(a);
        CHECK(log_laplace_T0(n2(), a) == doctest::Approx(std::log(s / std::sinh(s))).epsilon(1e-8));
    }
    CHECK(laplace_T0(n2(), 1e-9) == doctest::Approx(1.0).epsilon(1e-8));
    const double a1 = 1e5, a2 = 1e6;
    const double slope = std::log(log_laplace_T0(n2(), a2, 1e-6) / log_laplace_T0(n2(), a1, 1e-6)) / std::log(a2 / a1);
    CHECK(slope == doctest::Approx(0.5).epsilon(0.01));
    // two-factor product vs integration of the exact law from level 2 of mu_n = n(n+1)
    const std::vector<double> rates = {6.0, 2.0};
    for (double a : {0.5, 2.0}) {
        double integral = 0;
        const double dt = 1e-3;
        for (double t = dt / 2; t < 40; t += dt) integral += a * std::exp(-a * t) * hypoexp_cdf_partial_fractions(rates, t) * dt;
        CHECK(integral == doctest::Approx(6 / (6 + a) * 2 / (2 + a)).epsilon(1e-6));
    }
    const auto g = n2_birth_n();
    CHECK(laplace_T0(g, 2.0) == doctest::Approx(std::exp(log_laplace_T0(g, 2.0))).epsilon(1e-10));
    CHECK(laplace_T0(g, 2.0) < laplace_T0(g, 1.0));
}

TEST_CASE("fixed-point limit law") {
    const auto grid = [] {
        std::vector<double> g;
        for (int i = 1; i <= 50; ++i) g.push_back(0.2 * i);
        return g;
    }();
    const auto zero = limit_law_fixed_point(0.0, 0.5, grid);
    for (const auto& [a, G] : zero.grid) CHECK(G == doctest::Approx(1 / (1 + a)).epsilon(1e-10));
    for (auto [l, alpha] : {std::pair{0.3, 0.4}, std::pair{0.8, 0.2}, std::pair{0.5, 1.0}}) {
        const auto law = limit_law_fixed_point(l, alpha, grid);
        CHECK(law.max_residual <= 1e-10);
        for (std::size_t i = 1; i < law.grid.size(); ++i) CHECK(law.grid[i].second <= law.grid[i - 1].second);
        for (std::size_t i = 1; i < law.sup_change.size(); ++i)
            if (law.sup_change[i - 1] > 1e-13) CHECK(law.sup_change[i] <= l * law.sup_change[i - 1] * (1 + 1e-6) + 1e-15);
        const double h = 1e-4;
        const double d = -(-3 * limit_law_G(l, alpha, 0) + 4 * limit_law_G(l, alpha, h) - limit_law_G(l, alpha, 2 * h)) / (2 * h);
        CHECK(d == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(limit_law_G(l, alpha, 1e-9) == doctest::Approx(1.0).epsilon(1e-8));
    }
    for (double a : {0.5, 1.0, 2.0}) {
        double prod = 1;
        for (int k = 0; k < 200; ++k) prod /= 1 + a * std::ldexp(1.0, -k - 1);
        CHECK(limit_Z_transform(0.0, 0.5, a) == doctest::Approx(prod).epsilon(1e-10));
    }
    CHECK_THROWS_AS(limit_law_fixed_point(0.2, 0.0, grid), std::invalid_argument);
    CHECK_THROWS_AS(limit_law_fixed_point(1.0, 0.5, grid), std::invalid_argument);
    std::ostringstream os;
    zero.write_csv(os);
    CHECK(os.str().rfind("a,G\n", 0) == 0);
}

TEST_CASE("hypoexponential CDF") {
    const std::vector<double> one = {3.0};
    CHECK(hypoexp_cdf(one, 0.4) == doctest::Approx(1 - std::exp(-1.2)).epsilon(1e-11));
    const std::vector<double> two = {1.0, 2.0};
    for (double t : {0.1, 1.0, 5.0}) CHECK(hypoexp_cdf(two, t) == doctest::Approx(1 - 2 * std::exp(-t) + std::exp(-2 * t)).epsilon(1e-11));
    CHECK(hypoexp_cdf(two, 0.0) == 0.0);
    CHECK(hypoexp_cdf(two, INFINITY) == 1.0);
    CHECK(hypoexp_cdf(two, 60.0) == doctest::Approx(1.0).epsilon(1e-12));
    const auto rates = pure_death_rates(n2(), 20);
    CHECK(rates.size() == 20);
    for (double t : {0.2, 0.8, 1.5, 4.0})
        CHECK(hypoexp_cdf(rates, t) == doctest::Approx(hypoexp_cdf_partial_fractions(rates, t)).epsilon(1e-9));
    const auto big = pure_death_rates(n2(), 400);
    const std::vector<double> ts = {0.1, 0.2, 0.4, 0.8, 1.6, 3.2};
    const auto P = hypoexp_cdf(big, ts);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        CHECK(P[i] == doctest::Approx(hypoexp_cdf(big, ts[i])).epsilon(1e-12));
        if (i > 0) CHECK(P[i] >= P[i - 1]);
    }
    // theta-function oracle for the law from infinity: 2 sqrt(pi/t) sum exp(-pi^2 (2k+1)^2 / (4t))
    for (double t : {0.15, 0.3}) {
        double theta = 0;
        for (int k = 0; k < 6; ++k) theta += std::exp(-pi * pi * (2 * k + 1) * (2 * k + 1) / (4 * t));
        theta *= 2 * std::sqrt(pi / t);
        CHECK(hypoexp_cdf(big, t) == doctest::Approx(theta).epsilon(0.02));
    }
    const std::vector<double> bad = {1.0, -1.0};
    CHECK_THROWS_AS(hypoexp_cdf(bad, 1.0), std::invalid_argument);
    const std::vector<double> huge = {1e12};
    CHECK_THROWS_AS(hypoexp_cdf(huge, 1e3), ResourceError);
    CHECK_THROWS_AS(pure_death_rates(n2_birth_n(), 10), ModelError);
}

TEST_CASE("regular variation utilities") {
    auto seq = [](std::int64_t n0, std::int64_t n1, auto f) {
        std::vector<double> v;
        for (std::int64_t n = n0; n <= n1; ++n) v.push_back(f(double(n)));
        return v;
    };
    CHECK(rv_index(seq(1, 100, [](double n) { return n * n; }), 1).index == doctest::Approx(2.0).epsilon(0.005));
    const auto lg = rv_index(seq(1, 10000, [](double n) { return n * n * std::log(std::max(n, 2.0)); }), 1);
    CHECK(lg.index == doctest::Approx(2.0).epsilon(0.025));
    CHECK(lg.log_exponent == doctest::Approx(1.0).epsilon(0.05));
    CHECK(lg.plain_index > 2.05);
    CHECK(rv_index(seq(1, 1000, [](double n) { return 2 / n; }), 1).index == doctest::Approx(-1.0).epsilon(0.01));
    CHECK_THROWS_AS(rv_index(seq(1, 10, [](double n) { return n; }), 1), std::invalid_argument);
    CHECK_THROWS_AS(rv_index(seq(-5, 40, [](double n) { return n; }), -5), std::invalid_argument);

    const auto sq = rv_tail_sum_check([](std::int64_t k) { return std::pow(double(k), -2); }, 1000);
    CHECK(sq.ratio() == doctest::Approx(1.0).epsilon(0.002));
    double direct = 0;
    for (std::int64_t k = 1000; k < 4000000; ++k) direct += std::pow(double(k), -2);
    CHECK(sq.exact == doctest::Approx(direct + 1.0 / 4000000).epsilon(1e-6));
    const auto cube = rv_tail_sum_check([](std::int64_t k) { return std::pow(double(k), -3); }, 100);
    CHECK(cube.asymptotic == doctest::Approx(1.0 / (2 * 100.0 * 100.0)).epsilon(1e-6));
    CHECK_THROWS_AS(rv_tail_sum_check([](std::int64_t k) { return 1.0 / double(k); }, 100), ConvergenceError);
}

TEST_CASE("excursion moments") {
    const auto z = excursion_moments(n2(), 10);
    CHECK(z.mean == 0.0);
    CHECK(z.second == 0.0);
    const double p = 0.25;
    const auto c = RateModel::preset("custom", {{"birth_ratio", p}, {"death_exp", 2}});
    const auto e = excursion_moments(c, 20);
    CHECK(e.mean == doctest::Approx(p / (1 - p)).epsilon(1e-9));
    CHECK(e.mean_lo <= e.mean);
    CHECK(e.mean <= e.mean_hi);
    // E[H^2] <= C lambda_n / mu_n with a stable constant across the window
    const auto m = n2_birth_n();
    double lo = INFINITY, hi = 0;
    for (std::int64_t n = 20; n <= 2000; n *= 2) {
        const double ratio = excursion_moments(m, n).second / (m.birth(n) / m.death(n));
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    CHECK(hi < 3.0);
    CHECK(hi / lo < 1.5);
    const auto heavy = RateModel::preset("custom", {{"birth_ratio", 0.6}, {"death_exp", 2}});
    CHECK_THROWS_AS(excursion_moments(heavy, 10), ConvergenceError);
}
