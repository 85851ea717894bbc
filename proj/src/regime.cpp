#include "cdfi/regime.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "cdfi/detail/logmath.hpp"
#include "cdfi/regvar.hpp"

namespace cdfi {

std::string_view regime_name(Regime r) {
    switch (r) {
    case Regime::I: return "I";
    case Regime::II: return "II";
    case Regime::oscillating: return "oscillating";
    case Regime::undecided: return "undecided";
    }
    return "undecided";
}

std::string_view series_name(SeriesDiagnostic s) {
    switch (s) {
    case SeriesDiagnostic::convergent: return "convergent";
    case SeriesDiagnostic::divergent: return "divergent";
    case SeriesDiagnostic::undecided: return "undecided";
    }
    return "undecided";
}

RegimeReport regime(const AnalysisTable& table) {
    const auto& rows = table.rows();
    if (rows.size() < 60) throw std::invalid_argument("regime: window needs at least 60 levels");
    RegimeReport rep;
    rep.window_lo = table.n_min();
    rep.window_hi = table.n_max();
    const std::size_t half = rows.size() / 2;

    // Oscillation: residue classes mod p with clearly separated, individually stable values.
    for (int p = 2; p <= 4 && rep.regime == Regime::undecided; ++p) {
        std::vector<double> last(std::size_t(p), 0), spread(std::size_t(p), 0);
        const std::size_t quarter = rows.size() - rows.size() / 4;
        for (int c = 0; c < p; ++c) {
            double lo = 2, hi = -1;
            for (std::size_t i = quarter; i < rows.size(); ++i)
                if (rows[i].n % p == c) {
                    lo = std::min(lo, rows[i].r);
                    hi = std::max(hi, rows[i].r);
                    last[std::size_t(c)] = rows[i].r;
                }
            spread[std::size_t(c)] = hi - lo;
        }
        const double sep = *std::max_element(last.begin(), last.end()) - *std::min_element(last.begin(), last.end());
        const double noise = *std::max_element(spread.begin(), spread.end());
        if (sep > 0.05 && noise < 0.1 * sep) {
            rep.regime = Regime::oscillating;
            rep.period = p;
            std::vector<double> lims = last;
            std::sort(lims.begin(), lims.end());
            for (double v : lims)
                if (rep.subsequence_limits.empty() || v - rep.subsequence_limits.back() > 0.01)
                    rep.subsequence_limits.push_back(v);
            rep.alpha_estimate = rep.subsequence_limits.front();
            rep.sum_r_squared = SeriesDiagnostic::divergent;
        }
    }

    std::vector<double> x, y, rv;
    for (std::size_t i = half; i < rows.size(); ++i) {
        x.push_back(std::log(double(rows[i].n)));
        y.push_back(std::log(rows[i].r));
    }
    const auto fit = detail::fit_line(x, y);
    rep.trend_slope = fit.slope;

    if (rep.regime != Regime::oscillating) {
        const double top = rows.back().r;
        const double s = fit.slope;
        if (s < -0.02) {
            rep.regime = Regime::I;
        } else if (std::abs(s) <= 0.02) {
            rep.regime = top >= kRegimeThreshold ? Regime::II : Regime::I;
            if (rep.regime == Regime::II) rep.alpha_estimate = top;
        } else {
            rep.regime = top < kRegimeThreshold ? Regime::I : Regime::undecided;
            rep.notes.push_back("r_n increasing over the window");
        }
        if (rep.regime == Regime::II) {
            rep.sum_r_squared = SeriesDiagnostic::divergent;
        } else if (rep.regime == Regime::I) {
            const double s2 = 2 * s;  // slope of log r_n^2
            rep.sum_r_squared = s2 < -1.1 ? SeriesDiagnostic::convergent
                                : s2 > -0.95 ? SeriesDiagnostic::divergent
                                             : SeriesDiagnostic::undecided;
        }
    }
    rep.notes.push_back("a.s. vs in-probability convergence is not testable by simulation; sum of r_n^2 is a diagnostic only");

    const auto& model = table.model();
    std::vector<double> mu;
    for (const auto& r : rows) mu.push_back(model.death(r.n));
    bool finite = std::all_of(mu.begin(), mu.end(), [](double v) { return std::isfinite(v) && v > 0; });
    if (finite && mu.size() >= 30) {
        rep.rv_index_mu = rv_index(mu, rows.front().n).index;
    } else {
        // Work from log mu directly when mu overflows.
        std::vector<double> lx, ly;
        for (std::size_t i = half; i < rows.size(); ++i) {
            lx.push_back(std::log(double(rows[i].n)));
            ly.push_back(model.log_death(rows[i].n));
        }
        rep.rv_index_mu = detail::fit_line(lx, ly).slope;
    }
    return rep;
}

RegimeReport regime(const RateModel& model, std::int64_t lo, std::int64_t hi, double tol) {
    return regime(AnalysisTable::build(model, lo, hi, tol));
}

std::string RegimeReport::to_json() const {
    nlohmann::ordered_json j;
    j["regime"] = regime_name(regime);
    j["alpha_estimate"] = alpha_estimate;
    j["regime_threshold"] = kRegimeThreshold;
    j["period"] = period;
    j["subsequence_limits"] = subsequence_limits;
    j["trend_slope"] = trend_slope;
    j["sum_r_squared"] = series_name(sum_r_squared);
    j["rv_index_mu"] = rv_index_mu;
    j["window"] = {window_lo, window_hi};
    j["notes"] = notes;
    return j.dump(2);
}

} // namespace cdfi
