#include "cdfi/excursion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cdfi/detail/logmath.hpp"
#include "cdfi/error.hpp"
#include "cdfi/io.hpp"

namespace cdfi {

namespace {

constexpr std::int64_t kMaxTruncation = 1 << 24;
constexpr double kDominationLimit = 0.5;

struct Pair {
    double h = 0, s = 0;
};

// h_k = r_k (1 + h_{k+1});  s_k = r_k (s_{k+1} + 1 + 2(h_k + h_{k+1} + h_k h_{k+1})).
inline Pair step(double r, Pair up) {
    Pair p;
    p.h = r * (1 + up.h);
    p.s = r * (up.s + 1 + 2 * (p.h + up.h + p.h * up.h));
    return p;
}

} // namespace

ExcursionMoments excursion_moments(const RateModel& model, std::int64_t n, double tol) {
    if (n <= model.absorbing_level()) throw std::invalid_argument("excursion_moments: n must be above the absorbing level");
    if (!(tol > 0)) throw std::invalid_argument("excursion_moments: tol must be > 0");
    ExcursionMoments out;
    if (model.pure_death()) return out;

    std::int64_t N = std::max<std::int64_t>(4 * n, n + 64);
    double sup_seen = 0;
    while (N <= kMaxTruncation) {
        // Above N the chain is dominated by a walk stepping up with probability p = r/(1+r).
        double r_sup = 0;
        for (std::int64_t k = N; k <= 2 * N; ++k) r_sup = std::max(r_sup, std::exp(model.log_ratio(k)));
        sup_seen = r_sup;
        if (r_sup < kDominationLimit) {
            const double p = r_sup / (1 + r_sup);
            const double walk_mean = p / (1 - 2 * p);
            const double walk_second = p * (1 - p) / std::pow(1 - 2 * p, 3) + walk_mean * walk_mean;
            Pair lo, hi{walk_mean, walk_second};
            for (std::int64_t k = N; k >= n; --k) {
                const double r = std::exp(model.log_ratio(k));
                lo = step(r, lo);
                hi = step(r, hi);
            }
            out.mean_lo = lo.h;
            out.mean_hi = hi.h;
            out.second_lo = lo.s;
            out.second_hi = hi.s;
            out.mean = 0.5 * (lo.h + hi.h);
            out.second = 0.5 * (lo.s + hi.s);
            out.truncation_level = N;
            if (hi.h - lo.h <= tol * std::max(1.0, out.mean) && hi.s - lo.s <= tol * std::max(1.0, out.second))
                return out;
        }
        N *= 2;
    }
    if (sup_seen >= kDominationLimit)
        throw ConvergenceError("excursion_moments: lambda_n/mu_n >= 1/2 at all tested levels (domination unavailable)");
    throw ConvergenceError("excursion_moments: bracket did not close");
}

} // namespace cdfi
