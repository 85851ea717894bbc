#include "cdfi/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cdfi/detail/logmath.hpp"
#include "cdfi/error.hpp"
#include "cdfi/io.hpp"
#include "cdfi/moments.hpp"

namespace cdfi {

using detail::kInf;

namespace {

constexpr std::int64_t kMaxTruncation = 1 << 25;

// One step of G_{k-1} = mu_k / (a + mu_k + lambda_k (1 - G_k)) written for the complement
// h = 1 - G, which keeps precision when G is close to 1.
inline double step_h(const RateModel& model, std::int64_t k, double log_a, double h_k) {
    const double x = std::exp(log_a - model.log_death(k));
    const double y = std::exp(model.log_ratio(k)) * h_k;
    return (x + y) / (1 + x + y);
}

} // namespace

double laplace_G(const RateModel& model, std::int64_t n, double a, double tol) {
    if (!(a > 0)) throw std::invalid_argument("laplace_G: a must be > 0");
    if (n < model.absorbing_level()) throw std::invalid_argument("laplace_G: level below the absorbing level");
    const double log_a = std::log(a);
    std::int64_t N = std::max<std::int64_t>(4 * n, n + 64);
    double width = kInf, mid = 0;
    while (N <= kMaxTruncation) {
        // Seed G_N = 1 (h = 0) gives the upper bound, G_N = 0 (h = 1) the lower one.
        double h_hi = 0, h_lo = 1;
        for (std::int64_t k = N; k > n; --k) {
            h_hi = step_h(model, k, log_a, h_hi);
            h_lo = step_h(model, k, log_a, h_lo);
        }
        width = h_lo - h_hi;
        mid = 1 - 0.5 * (h_lo + h_hi);
        if (width <= tol) return mid;
        N *= 2;
    }
    throw ConvergenceError("laplace_G: bracket did not close (width " + format_real(width) + ")");
}

double log_laplace_T0(const RateModel& model, double a, double tol) {
    if (!(a > 0)) throw std::invalid_argument("laplace_T0: a must be > 0");
    const std::int64_t bottom = model.absorbing_level();
    const double log_a = std::log(a);
    std::int64_t N = 256;
    double lo = 0, hi = 0;
    while (N <= kMaxTruncation) {
        constexpr double tail_rtol = 1e-8;
        const auto t = AnalysisTable::build(model, N, N, tail_rtol);
        const auto& row = t.at(N);
        // Seeds for G_N: 1 above, exp(-a E tau_N) below (Jensen).
        double h_hi = 0, h_lo = -std::expm1(-a * row.m * (1 + tail_rtol)), s_hi = 0, s_lo = 0;
        for (std::int64_t k = N; k > bottom; --k) {
            h_hi = step_h(model, k, log_a, h_hi);
            h_lo = step_h(model, k, log_a, h_lo);
            s_hi += std::log1p(-h_hi);
            s_lo += std::log1p(-h_lo);
        }
        // Factors k >= N: log G_k lies in [-a m_k, -a m_k + a^2 E tau_k^2 / 2].
        const double aE = a * row.E_inf_T;
        const double second_sum = row.var_T + row.m * row.E_inf_T;
        lo = s_lo - aE * (1 + tail_rtol);
        hi = s_hi + std::min(0.0, -aE * (1 - tail_rtol) + 0.5 * a * a * second_sum);
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= tol * std::max(1.0, std::abs(mid))) return mid;
        N *= 2;
    }
    throw ConvergenceError("laplace_T0: enclosure did not close (width " + format_real(hi - lo) + ")");
}

double laplace_T0(const RateModel& model, double a, double tol) { return std::exp(log_laplace_T0(model, a, tol)); }

namespace {

void check_limit_args(double l, double alpha) {
    if (!(l >= 0 && l < 1)) throw std::invalid_argument("limit law: l must be in [0, 1)");
    if (alpha == 0) throw std::invalid_argument("limit law: alpha = 0 is regime I, which has no fixed-point law");
    if (!(alpha > 0 && alpha <= 1)) throw std::invalid_argument("limit law: alpha must be in (0, 1]");
}

constexpr double kCascadeCut = 1e-7;

inline double H(double l, double alpha, double a, double g_next) {
    return 1 / (1 + l * (1 - g_next) + a * (1 - l * (1 - alpha)));
}

// Points a (1-alpha)^k down to the cut-off; empty cascade tail when alpha = 1.
std::vector<double> cascade(double a, double alpha) {
    std::vector<double> pts{a};
    if (alpha < 1)
        while (pts.back() >= kCascadeCut && pts.size() < 100000) pts.push_back(pts.back() * (1 - alpha));
    return pts;
}

} // namespace

double limit_law_G(double l, double alpha, double a, double) {
    check_limit_args(l, alpha);
    if (a == 0) return 1;
    if (alpha == 1) return 1 / (1 + a);
    const auto pts = cascade(a, alpha);
    // Exact backward substitution along the chain, closed with G(x) ~ 1 - x at the cut-off.
    double g = 1 - pts.back();
    for (std::size_t i = pts.size() - 1; i-- > 0;) g = H(l, alpha, pts[i], g);
    return g;
}

LimitLaw limit_law_fixed_point(double l, double alpha, std::span<const double> a_grid, double tol) {
    check_limit_args(l, alpha);
    if (!(tol > 0)) throw std::invalid_argument("limit law: tol must be > 0");
    LimitLaw law;
    law.l = l;
    law.alpha = alpha;
    law.tol = tol;

    std::vector<std::vector<double>> pts, g;
    for (double a : a_grid) {
        if (!(a > 0)) throw std::invalid_argument("limit law: grid points must be > 0");
        pts.push_back(cascade(a, alpha));
        g.emplace_back(pts.back().size(), 1.0);
    }
    // Jacobi sweeps g <- H(g); each sweep contracts the sup-norm error by at least l.
    for (int sweep = 0; sweep < 100000; ++sweep) {
        double change = 0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            const auto& p = pts[j];
            std::vector<double> next(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double g_next = alpha == 1 ? 1.0 : (i + 1 < p.size() ? g[j][i + 1] : 1 - p.back() * (1 - alpha));
                next[i] = H(l, alpha, p[i], g_next);
                change = std::max(change, std::abs(next[i] - g[j][i]));
            }
            g[j] = std::move(next);
        }
        law.sup_change.push_back(change);
        if (change <= tol) break;
    }
    for (std::size_t j = 0; j < pts.size(); ++j) {
        const double a = pts[j][0];
        const double g_next = alpha == 1 ? 1.0 : (pts[j].size() > 1 ? g[j][1] : 1 - a * (1 - alpha));
        law.max_residual = std::max(law.max_residual, std::abs(g[j][0] - H(l, alpha, a, g_next)));
        law.grid.emplace_back(a, g[j][0]);
    }
    return law;
}

double limit_Z_transform(double l, double alpha, double a, double tol) {
    check_limit_args(l, alpha);
    if (!(a >= 0)) throw std::invalid_argument("limit_Z_transform: a must be >= 0");
    if (alpha == 1) return limit_law_G(l, alpha, a, tol);
    double log_prod = 0, b = a * alpha;
    while (b >= kCascadeCut) {
        log_prod += std::log(limit_law_G(l, alpha, b, tol));
        b *= 1 - alpha;
    }
    // Remaining factors are 1 - b_k + O(b_k^2); sum of b_k is b / alpha.
    return std::exp(log_prod - b / alpha);
}

void LimitLaw::write_csv(std::ostream& os) const {
    CsvWriter w(os);
    w.header({"a", "G"});
    for (const auto& [a, v] : grid) {
        w.field(a).field(v);
        w.end_row();
    }
}

} // namespace cdfi
