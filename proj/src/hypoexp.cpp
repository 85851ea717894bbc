#include "cdfi/hypoexp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cdfi/error.hpp"

namespace cdfi {

namespace {

constexpr double kMaxSteps = 2e9;
constexpr double kCutoff = 1e-12;
constexpr double kSigmas = 36;  // left window edge; e^{-36^2/2} is far below the cutoff

struct Target {
    double lt = 0;          // Lambda * t
    std::int64_t k_lo = 0;  // first Poisson index accumulated
    double log_lt = 0;
    double lw = 0;          // log of the current Poisson weight (weights may underflow)
    double acc = 0;
    bool done = false;
};

} // namespace

std::vector<double> hypoexp_cdf(std::span<const double> rates, std::span<const double> ts) {
    for (double r : rates)
        if (!(r > 0) || !std::isfinite(r)) throw std::invalid_argument("hypoexp_cdf: rates must be finite and > 0");
    for (double t : ts)
        if (!(t >= 0)) throw std::invalid_argument("hypoexp_cdf: t must be >= 0");
    std::vector<double> out(ts.size(), 0.0);
    if (rates.empty()) {
        std::fill(out.begin(), out.end(), 1.0);
        return out;
    }

    const double Lambda = *std::max_element(rates.begin(), rates.end());
    const std::size_t m = rates.size();
    std::vector<double> q(m);
    for (std::size_t i = 0; i < m; ++i) q[i] = rates[i] / Lambda;

    std::vector<Target> tg(ts.size());
    double lt_max = 0;
    std::size_t open = 0;
    for (std::size_t j = 0; j < ts.size(); ++j) {
        auto& x = tg[j];
        x.lt = Lambda * ts[j];
        if (ts[j] == 0) { x.done = true; continue; }
        if (std::isinf(ts[j])) { out[j] = 1; x.done = true; continue; }
        lt_max = std::max(lt_max, x.lt);
        x.k_lo = std::max<std::int64_t>(0, std::int64_t(std::floor(x.lt - kSigmas * std::sqrt(x.lt) - 10)));
        const double k = double(x.k_lo);
        x.log_lt = std::log(x.lt);
        x.lw = -x.lt + k * x.log_lt - std::lgamma(k + 1);
        ++open;
    }
    if (lt_max + 40 * std::sqrt(lt_max) > kMaxSteps)
        throw ResourceError("hypoexp_cdf: rate * t too large for uniformization; use fewer levels or smaller t");

    // p[i]: mass in stage i; absorbed mass after k steps kept separately (no cancellation).
    std::vector<double> p(m, 0.0);
    p[0] = 1;
    double absorbed = 0;
    std::size_t first = 0;  // stages below 'first' hold negligible mass
    for (std::int64_t k = 0; open > 0; ++k) {
        for (std::size_t j = 0; j < tg.size(); ++j) {
            auto& x = tg[j];
            if (x.done || k < x.k_lo) continue;
            x.acc += std::exp(x.lw) * absorbed;
            const double kd = double(k);
            // Remaining weights sum to at most w_{k+1} / (1 - lt/(k+2)) once past the mode.
            const double lw_next = x.lw + x.log_lt - std::log(kd + 1);
            if (kd + 2 > x.lt) {
                const double rest = std::exp(lw_next) / (1 - x.lt / (kd + 2));
                if (rest <= kCutoff * x.acc || (rest < 1e-300 && kd > x.lt)) {
                    out[j] = std::min(1.0, x.acc);
                    x.done = true;
                    --open;
                    continue;
                }
            }
            x.lw = lw_next;
        }
        if (open == 0) break;
        // One uniformized step: each stage advances with probability q_i.  Stages above k
        // are still empty.
        const std::size_t top = std::min<std::size_t>(m - 1, std::size_t(k));
        for (std::size_t i = top + 1; i-- > first;) {
            const double move = p[i] * q[i];
            p[i] -= move;
            if (i + 1 < m) p[i + 1] += move;
            else absorbed += move;
        }
        while (first + 1 < m && p[first] < 1e-300) ++first;
        if (double(k) > kMaxSteps) throw ResourceError("hypoexp_cdf: step budget exhausted");
    }
    return out;
}

double hypoexp_cdf(std::span<const double> rates, double t) {
    const double ts[1] = {t};
    return hypoexp_cdf(rates, std::span<const double>(ts, 1))[0];
}

double hypoexp_cdf_partial_fractions(std::span<const double> rates, double t) {
    if (rates.size() > 30) throw std::invalid_argument("partial fractions limited to 30 rates");
    for (std::size_t i = 0; i < rates.size(); ++i)
        for (std::size_t j = i + 1; j < rates.size(); ++j)
            if (rates[i] == rates[j]) throw std::invalid_argument("partial fractions need distinct rates");
    if (t <= 0) return 0;
    double surv = 0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        double c = 1;
        for (std::size_t j = 0; j < rates.size(); ++j)
            if (j != i) c *= rates[j] / (rates[j] - rates[i]);
        surv += c * std::exp(-rates[i] * t);
    }
    return std::clamp(1 - surv, 0.0, 1.0);
}

std::vector<double> pure_death_rates(const RateModel& model, std::int64_t N) {
    if (!model.pure_death()) throw ModelError("pure_death_rates: model has births");
    std::vector<double> r;
    for (std::int64_t n = N; n > model.absorbing_level(); --n) r.push_back(model.death(n));
    return r;
}

} // namespace cdfi
