#include "cdfi/rng.hpp"

#include <cstdlib>
#include <string>

#include "cdfi/parallel.hpp"

namespace cdfi {

std::int64_t poisson(Xoshiro256pp& rng, double mean) {
    if (!(mean > 0)) return 0;
    if (mean < 10) {
        const double L = std::exp(-mean);
        std::int64_t k = 0;
        double p = rng.uniform_pos();
        while (p > L) {
            ++k;
            p *= rng.uniform_pos();
        }
        return k;
    }
    const double slam = std::sqrt(mean), loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2);
    while (true) {
        const double U = rng.uniform() - 0.5;
        const double V = rng.uniform_pos();
        const double us = 0.5 - std::abs(U);
        const double k = std::floor((2 * a / us + b) * U + mean + 0.43);
        if (us >= 0.07 && V <= vr) return std::int64_t(k);
        if (k < 0 || (us < 0.013 && V > us)) continue;
        if (std::log(V) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1))
            return std::int64_t(k);
    }
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CDFI_WORKERS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (...) {
        }
    }
    return 1;
}

} // namespace cdfi
