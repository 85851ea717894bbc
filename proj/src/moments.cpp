#include "cdfi/moments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cdfi/detail/logmath.hpp"
#include "cdfi/error.hpp"
#include "cdfi/io.hpp"

namespace cdfi {

using detail::kInf;
using detail::log_add;

namespace {

constexpr std::int64_t kSeriesMaxTerms = 10'000'000;
constexpr std::int64_t kLookahead = 64;
constexpr std::int64_t kTruncationCap = 10'000'000;
const double kLog2 = std::log(2.0), kLog3 = std::log(3.0), kLog4 = std::log(4.0), kLog6 = std::log(6.0);

double log_sum3(double a, double b, double c) { return log_add(log_add(a, b), c); }

// log of sum_{k>K} f_k from samples of log f at K/2, K-1, K, K+1.  Power-law envelope when the
// local and secant log-log slopes agree, geometric otherwise.  +inf when the envelope diverges.
double log_tail(double lf_half, double lf_km1, double lf_k, double lf_kp1, std::int64_t K) {
    const double Kd = double(K);
    const double p_loc = (lf_km1 - lf_kp1) / std::log((Kd + 1) / (Kd - 1));
    const double p_sec = (lf_half - lf_k) / std::log(Kd / double(K / 2));
    if (p_sec > 0 && p_sec < 50 && p_loc > 0 && std::max(p_loc / p_sec, p_sec / p_loc) < 1.5) {
        if (p_loc <= 1) return kInf;
        return lf_k + p_loc * std::log(Kd) + (1 - p_loc) * std::log(Kd + 0.5) - std::log(p_loc - 1);
    }
    const double d = (lf_half - lf_k) / double(K - K / 2);
    if (!(d > 0)) return kInf;
    return lf_k - d - detail::log1m_exp(-d);
}

struct Beyond {
    double logE = -kInf, logV = -kInf, log3 = -kInf;  // sums over k > n_max, tails included
    double log_m = 0, log_M2 = 0, log_M3 = 0;         // at n_max + 1
};

struct Level {
    double log_m, log_M2, log_M3, log_var, log_3c;
};

Level finish(double log_m, double log_M2, double log_M3) {
    Level l{log_m, log_M2, log_M3, 0, 0};
    l.log_var = log_M2 + detail::log1m_exp(std::min(0.0, 2 * log_m - log_M2));
    l.log_3c = log_sum3(log_M3, kLog3 + log_m + log_M2, kLog4 + 3 * log_m);
    return l;
}

// One step down: quantities at k from those at k+1 (k+1 carries lambda_{k+1}, mu_{k+1}).
Level step_down(const RateModel& model, std::int64_t k, const Level& up, double log_m_k) {
    const double lr = model.log_ratio(k + 1);
    const double log_M2 = log_add(lr + up.log_M2, kLog2 + 2 * log_m_k);
    const double log_M3 = log_sum3(lr + up.log_M3, kLog3 + log_M2 + log_m_k, kLog3 + lr + log_m_k + up.log_M2);
    return finish(log_m_k, log_M2, log_M3);
}

Beyond sweep(const RateModel& model, std::int64_t lo, std::int64_t K) {
    const std::int64_t top = K + 1;
    const double ld = model.log_death(top + 1);
    Level cur = finish(log_tau_mean(model, top, 1e-14), kLog2 - 2 * ld, kLog6 - 3 * ld);
    detail::LogSum E, V, T3;
    Level at_kp1 = cur, at_k{}, at_km1{}, at_half{};
    for (std::int64_t k = top;; --k) {
        if (k < top) {
            const double log_m = detail::log1p_exp(model.log_birth(k + 1) + cur.log_m) - model.log_death(k + 1);
            cur = step_down(model, k, cur, log_m);
        }
        if (k <= K) {
            E.add(cur.log_m);
            V.add(cur.log_var);
            T3.add(cur.log_3c);
        }
        if (k == K) at_k = cur;
        if (k == K - 1) at_km1 = cur;
        if (k == K / 2) at_half = cur;
        if (k == lo) break;
    }
    const double tE = log_tail(at_half.log_m, at_km1.log_m, at_k.log_m, at_kp1.log_m, K);
    const double tV = log_tail(at_half.log_var, at_km1.log_var, at_k.log_var, at_kp1.log_var, K);
    const double t3 = log_tail(at_half.log_3c, at_km1.log_3c, at_k.log_3c, at_kp1.log_3c, K);
    if (tE == kInf)
        throw ConvergenceError("E_inf[T_n] is infinite: the sum of m_k diverges (no coming down from infinity)");
    if (tV == kInf) throw ConvergenceError("Var_inf[T_n] is infinite: the sum of Var(tau_k) diverges");
    Beyond b;
    b.logE = log_add(E.value, tE);
    b.logV = log_add(V.value, tV);
    b.log3 = t3 == kInf ? kInf : log_add(T3.value, t3);
    b.log_m = cur.log_m;
    b.log_M2 = cur.log_M2;
    b.log_M3 = cur.log_M3;
    return b;
}

double rel_change(double log_new, double log_old) { return std::abs(std::expm1(log_new - log_old)); }

} // namespace

double log_tau_mean(const RateModel& model, std::int64_t n, double tol) {
    if (n < model.absorbing_level() || n < 0)
        throw std::invalid_argument("tau_mean: level " + std::to_string(n) + " is below the absorbing level");
    if (!(tol > 0)) throw std::invalid_argument("tau_mean: tol must be > 0");
    const double ld = model.log_death(n + 1);
    if (ld == -kInf) throw ConvergenceError("mean hitting time infinite: mu_" + std::to_string(n + 1) + " = 0");
    const double lrtol = std::log(tol);
    double term = -ld, acc = -ld;
    std::int64_t skip_until = 0;
    for (std::int64_t j = n + 1, count = 1;; ++j, ++count) {
        const double lb = model.log_birth(j);
        if (lb == -kInf) return acc;
        term += lb - model.log_death(j + 1);
        acc = log_add(acc, term);
        const bool small = term - acc < lrtol;
        if ((small && j >= skip_until) || count % 65536 == 0) {
            double qmax = -kInf;
            for (std::int64_t i = j + 1; i <= j + kLookahead; ++i)
                qmax = std::max(qmax, model.log_birth(i) - model.log_death(i + 1));
            if (qmax < 0) {
                const double bound = term + qmax - detail::log1m_exp(qmax);
                if (small && bound - acc < lrtol) return acc;
            } else if (count >= 65536) {
                throw ConvergenceError("mean hitting time infinite or undecidable at level " + std::to_string(n) +
                                       " (lambda/mu ratio envelope >= 1)");
            }
            skip_until = j + kLookahead;
        }
        if (count > kSeriesMaxTerms)
            throw ConvergenceError("mean hitting time infinite or undecidable at level " + std::to_string(n));
    }
}

double tau_mean(const RateModel& model, std::int64_t n, double tol) {
    return std::exp(log_tau_mean(model, n, tol));
}

AnalysisTable AnalysisTable::build(const RateModel& model, std::int64_t n_min, std::int64_t n_max, double tol) {
    if (!(tol > 0)) throw std::invalid_argument("AnalysisTable: tol must be > 0");
    if (n_min < model.absorbing_level() || n_min < 0)
        throw std::invalid_argument("AnalysisTable: n_min below the absorbing level");
    if (n_max < n_min) throw std::invalid_argument("AnalysisTable: empty level range");

    AnalysisTable t(model);
    t.n_min_ = n_min;
    t.n_max_ = n_max;
    t.tol_ = tol;

    const std::int64_t lo = n_max + 1;
    const std::int64_t cap = std::max(kTruncationCap, 16 * lo);
    std::int64_t K = std::max<std::int64_t>(8 * lo, 256);
    Beyond b = sweep(model, lo, K);
    double change = kInf;
    while (true) {
        if (2 * K > cap) {
            t.warnings_.push_back("truncation cap " + std::to_string(cap) + " reached; last relative change " +
                                  format_real(change));
            break;
        }
        Beyond nb = sweep(model, lo, 2 * K);
        K *= 2;
        change = std::max(rel_change(nb.logE, b.logE), rel_change(nb.logV, b.logV));
        b = nb;
        if (change <= tol) break;
    }
    t.truncation_ = K;
    t.tail_change_ = change;

    const double series_tol = std::min(1e-13, tol * 1e-3);
    const std::size_t count = std::size_t(n_max - n_min + 1);
    t.rows_.resize(count);
    Level up = finish(b.log_m, b.log_M2, b.log_M3);
    double logE = b.logE, logV = b.logV, log3 = b.log3;
    for (std::int64_t n = n_max; n >= n_min; --n) {
        const Level cur = step_down(model, n, up, log_tau_mean(model, n, series_tol));
        logE = log_add(logE, cur.log_m);
        logV = log_add(logV, cur.log_var);
        log3 = log_add(log3, cur.log_3c);
        TableRow& row = t.rows_[std::size_t(n - n_min)];
        row.n = n;
        row.log_m = cur.log_m;
        row.m = std::exp(cur.log_m);
        row.log_second = cur.log_M2;
        row.log_third = cur.log_M3;
        row.second = std::exp(cur.log_M2);
        row.third = std::exp(cur.log_M3);
        row.var_tau = std::exp(cur.log_var);
        row.third_central_bound = std::exp(cur.log_3c);
        row.log_E_inf_T = logE;
        row.E_inf_T = std::exp(logE);
        row.log_var_T = logV;
        row.var_T = std::exp(logV);
        row.third_sum = std::exp(log3);
        row.r = std::exp(cur.log_m - logE);
        up = cur;
    }

    // log pi_n = sum_{j<n} log lambda_j - sum_{j<=n} log mu_j over levels above the floor.
    const std::int64_t bottom = model.absorbing_level();
    double lp = 0;
    for (std::int64_t j = bottom + 1; j <= n_min; ++j) lp += (j > bottom + 1 ? model.log_birth(j - 1) : 0.0) - model.log_death(j);
    for (std::int64_t n = n_min; n <= n_max; ++n) {
        if (n > n_min) lp += model.log_birth(n - 1) - model.log_death(n);
        t.rows_[std::size_t(n - n_min)].log_pi = n <= bottom ? 0.0 : lp;
    }

    if (n_min <= 1 && 1 <= n_max) {
        t.S_ = t.at(1).E_inf_T;
    } else {
        double ls = t.rows_.front().log_E_inf_T;
        for (std::int64_t k = std::max<std::int64_t>(1, bottom); k < n_min; ++k) ls = log_add(ls, log_tau_mean(model, k, series_tol));
        t.S_ = std::exp(ls);
    }
    return t;
}

const TableRow& AnalysisTable::at(std::int64_t n) const {
    if (!contains(n)) throw std::out_of_range("AnalysisTable: level " + std::to_string(n) + " not tabulated");
    return rows_[std::size_t(n - n_min_)];
}

double AnalysisTable::m_recursion_residual(std::int64_t n) const {
    const TableRow& a = at(n - 1);
    const TableRow& b = at(n);
    return std::abs(1 - std::exp(model_.log_ratio(n) + b.log_m - a.log_m) - std::exp(-model_.log_death(n) - a.log_m));
}

double AnalysisTable::second_moment_residual(std::int64_t n) const {
    const TableRow& a = at(n - 1);
    const TableRow& b = at(n);
    return std::abs(1 - std::exp(model_.log_ratio(n) + b.log_second - a.log_second) -
                    std::exp(kLog2 + 2 * a.log_m - a.log_second));
}

void AnalysisTable::write_csv(std::ostream& os) const {
    CsvWriter w(os);
    w.header({"n", "log_pi", "m_n", "E_inf_T", "var_tau", "var_T", "r_n"});
    for (const auto& r : rows_) {
        w.field(r.n).field(r.log_pi).field(r.m).field(r.E_inf_T).field(r.var_tau).field(r.var_T).field(r.r);
        w.end_row();
    }
}

double hitting_mean_from_infinity(const RateModel& model, std::int64_t n, double tol) {
    return AnalysisTable::build(model, n, n, tol).at(n).E_inf_T;
}

TauMoments tau_higher_moments(const RateModel& model, std::int64_t n, double tol) {
    const auto t = AnalysisTable::build(model, n, n, tol);
    return {t.at(n).second, t.at(n).third};
}

double var_T_from_infinity(const RateModel& model, std::int64_t n, double tol) {
    return AnalysisTable::build(model, n, n, tol).at(n).var_T;
}

SpeedFunction::SpeedFunction(const RateModel& model, double tol)
    : model_(model), tol_(tol),
      table_(AnalysisTable::build(model, std::max<std::int64_t>(1, model.absorbing_level()), 64, tol)) {}

void SpeedFunction::grow(std::int64_t n_max) {
    table_ = AnalysisTable::build(model_, table_.n_min(), n_max, tol_);
}

double SpeedFunction::E_inf_T(std::int64_t n) {
    if (n < table_.n_min()) throw std::out_of_range("SpeedFunction: level below table");
    if (n > table_.n_max()) grow(std::max(n, 2 * table_.n_max()));
    return table_.at(n).E_inf_T;
}

std::int64_t SpeedFunction::operator()(double t) {
    if (!(t > 0)) throw std::invalid_argument("speed: t must be > 0");
    if (t >= table_.rows().front().E_inf_T) return table_.n_min();
    while (table_.rows().back().E_inf_T > t) {
        if (table_.n_max() > (std::int64_t(1) << 40)) throw ResourceError("speed: t too small for the table");
        grow(2 * table_.n_max());
    }
    const auto& rows = table_.rows();
    auto it = std::partition_point(rows.begin(), rows.end(), [t](const TableRow& r) { return r.E_inf_T > t; });
    return it->n;
}

std::int64_t speed(const RateModel& model, double t, double tol) { return SpeedFunction(model, tol)(t); }

} // namespace cdfi
