#include "cdfi/rates.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "cdfi/detail/logmath.hpp"
#include "cdfi/error.hpp"
#include "cdfi/io.hpp"

namespace cdfi {

using detail::kInf;

namespace {

struct FamilyInfo {
    Family family;
    std::string_view name;
    // Admissible keys with defaults, in canonical order.
    std::vector<std::pair<std::string, double>> defaults;
};

const std::vector<FamilyInfo>& families() {
    static const std::vector<FamilyInfo> table = {
        {Family::kingman, "kingman", {}},
        {Family::power, "power", {{"rho", 2.0}, {"gamma", 0.0}, {"c", 1.0}}},
        {Family::logistic, "logistic", {{"b", 1.0}, {"d", 1.0}, {"c", 1.0}}},
        {Family::factorial, "factorial", {{"gamma", 1.0}}},
        {Family::exponential, "exponential", {{"beta", std::log(2.0)}}},
        {Family::alternating, "alternating", {}},
        {Family::marginal, "marginal", {}},
        {Family::pure_death_power, "pure-death-power", {{"rho", 2.0}, {"coef", 1.0}}},
        {Family::custom,
         "custom",
         {{"birth_coef", 0.0},
          {"birth_exp", 1.0},
          {"birth_ratio", -1.0},
          {"death_coef", 1.0},
          {"death_exp", 2.0},
          {"death_log", 0.0}}},
    };
    return table;
}

const FamilyInfo& info(Family f) {
    for (const auto& fi : families())
        if (fi.family == f) return fi;
    throw ModelError("unknown family");
}

// log(log(max(n, 2)))
inline double loglog(std::int64_t n) noexcept {
    return std::log(std::log(double(std::max<std::int64_t>(n, 2))));
}

[[noreturn]] void reject(std::string_view family, const std::string& why) {
    throw ModelError("preset '" + std::string(family) + "': " + why);
}

} // namespace

std::string_view family_name(Family f) { return info(f).name; }

std::optional<Family> parse_family(std::string_view name) {
    for (const auto& fi : families())
        if (fi.name == name) return fi.family;
    return std::nullopt;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& fi : families()) v.emplace_back(fi.name);
        return v;
    }();
    return names;
}

RateModel RateModel::preset(std::string_view name, const ParamList& params) {
    const auto fam = parse_family(name);
    if (!fam) {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ModelError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
    }
    const auto& fi = info(*fam);
    RateModel m;
    m.family_ = *fam;
    m.name_ = std::string(fi.name);
    m.params_ = fi.defaults;
    for (const auto& [k, v] : params) {
        bool known = false;
        for (auto& [dk, dv] : m.params_)
            if (dk == k) { dv = v; known = true; }
        if (!known) reject(fi.name, "unknown parameter '" + k + "'");
        if (!std::isfinite(v)) reject(fi.name, "parameter '" + k + "' must be finite");
    }
    m.configure();
    return m;
}

void RateModel::configure() {
    const auto p = [this](std::string_view k) { return get_param(params_, k, 0.0); };
    const auto fname = family_name(family_);
    switch (family_) {
    case Family::kingman:
        claimed_index_ = 2.0;
        pure_death_ = true;
        break;
    case Family::power:
        c0_ = p("rho");
        c1_ = p("gamma");
        c2_ = p("c");
        if (c0_ < 1 || (c0_ == 1 && c1_ <= 1))
            reject(fname, "needs rho > 1, or rho = 1 with gamma > 1 (sum of 1/mu_n diverges otherwise)");
        if (c2_ < 0) reject(fname, "birth coefficient c must be >= 0");
        claimed_index_ = c0_;
        pure_death_ = c2_ == 0;
        break;
    case Family::logistic:
        c0_ = p("b");
        c1_ = p("d");
        c2_ = p("c");
        if (c0_ < 0) reject(fname, "b must be >= 0");
        if (c1_ <= 0) reject(fname, "d must be > 0 (mu_1 = d)");
        if (c2_ <= 0) reject(fname, "competition c must be > 0");
        claimed_index_ = 2.0;
        pure_death_ = c0_ == 0;
        break;
    case Family::factorial:
        c0_ = p("gamma");
        if (c0_ <= 0) reject(fname, "gamma must be > 0");
        pure_death_ = true;
        break;
    case Family::exponential:
        c0_ = p("beta");
        if (c0_ <= 0) reject(fname, "beta must be > 0 (mu_n = exp(beta n) must increase)");
        pure_death_ = true;
        break;
    case Family::alternating:
    case Family::marginal:
        pure_death_ = true;
        break;
    case Family::pure_death_power:
        c0_ = p("rho");
        c1_ = p("coef");
        if (c0_ <= 1) reject(fname, "rho must be > 1");
        if (c1_ <= 0) reject(fname, "coef must be > 0");
        c1_ = std::log(c1_);
        claimed_index_ = c0_;
        pure_death_ = true;
        break;
    case Family::custom:
        c0_ = p("birth_coef");
        c1_ = p("birth_exp");
        c5_ = p("birth_ratio");
        c2_ = p("death_coef");
        c3_ = p("death_exp");
        c4_ = p("death_log");
        if (c2_ <= 0) reject(fname, "death_coef must be > 0");
        if (c0_ < 0) reject(fname, "birth_coef must be >= 0");
        ratio_birth_ = c5_ >= 0;
        c0_ = c0_ > 0 ? std::log(c0_) : -kInf;
        c2_ = std::log(c2_);
        c5_ = ratio_birth_ ? (c5_ > 0 ? std::log(c5_) : -kInf) : 0.0;
        claimed_index_ = c3_;
        pure_death_ = ratio_birth_ ? c5_ == -kInf : c0_ == -kInf;
        break;
    }
}

double RateModel::log_death(std::int64_t n) const noexcept {
    if (n <= 0) return -kInf;
    const double ln = std::log(double(n));
    switch (family_) {
    case Family::kingman:
        return n < 2 ? -kInf : ln + std::log(double(n - 1)) - std::log(2.0);
    case Family::power:
        return c0_ * ln + (c1_ != 0 ? c1_ * loglog(n) : 0.0);
    case Family::logistic:
        return ln + std::log(c1_ + c2_ * double(n - 1));
    case Family::factorial:
        return c0_ * std::lgamma(double(n) + 1.0);
    case Family::exponential:
        return c0_ * double(n);
    case Family::alternating:
        return double(2 * (n / 2)) * std::log(3.0);
    case Family::marginal: {
        const double L = std::log(double(std::max<std::int64_t>(n, 2)));
        return double(n) / L + std::log(L);
    }
    case Family::pure_death_power:
        return c1_ + c0_ * ln;
    case Family::custom:
        return c2_ + c3_ * ln + (c4_ != 0 ? c4_ * loglog(n) : 0.0);
    }
    return -kInf;
}

double RateModel::log_birth(std::int64_t n) const noexcept {
    if (n <= 0 || pure_death_) return -kInf;
    switch (family_) {
    case Family::power:
        return std::log(c2_) + std::log(double(n));
    case Family::logistic:
        return std::log(c0_) + std::log(double(n));
    case Family::custom:
        return ratio_birth_ ? c5_ + log_death(n) : c0_ + c1_ * std::log(double(n));
    default:
        return -kInf;
    }
}

double RateModel::birth(std::int64_t n) const noexcept { return std::exp(log_birth(n)); }
double RateModel::death(std::int64_t n) const noexcept { return std::exp(log_death(n)); }

std::string RateModel::canonical() const {
    std::string s(family_name(family_));
    for (const auto& [k, v] : params_) s += ";" + k + "=" + format_real(v);
    return s;
}

std::string RateModel::to_text() const {
    std::string s = "family = " + std::string(family_name(family_)) + "\n";
    for (const auto& [k, v] : params_) s += k + " = " + format_real(v) + "\n";
    return s;
}

RateModel RateModel::from_text(std::string_view text) {
    std::string family;
    ParamList params;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ModelError("model file line " + std::to_string(lineno) + ": expected key = value");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        auto strip = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
        };
        strip(key);
        strip(val);
        if (key == "family" || key == "preset") {
            family = val;
            continue;
        }
        if (key == "name") continue;
        try {
            params.push_back(parse_param_assignment(key + "=" + val));
        } catch (const std::invalid_argument& e) {
            throw ModelError("model file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (family.empty()) throw ModelError("model file has no 'family' entry");
    return preset(family, params);
}

RateModel RateModel::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ModelError("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

std::string_view verdict_name(Verdict v) {
    switch (v) {
    case Verdict::yes: return "yes";
    case Verdict::no: return "no";
    case Verdict::undecided: return "undecided";
    }
    return "undecided";
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return detail::kNaN;
    const auto mid = v.begin() + std::ptrdiff_t(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

} // namespace

AssumptionReport check_assumptions(const RateModel& model, std::int64_t horizon, double tol) {
    if (horizon < 100) throw std::invalid_argument("check_assumptions: horizon must be >= 100");
    if (!(tol > 0)) throw std::invalid_argument("check_assumptions: tol must be > 0");

    AssumptionReport rep;
    const std::int64_t h = horizon;
    const std::int64_t lo = h / 2;
    const std::int64_t bottom = model.absorbing_level();
    rep.window_lo = lo;
    rep.window_hi = h;

    // Level 0 (or 1 for Kingman) is the absorbing floor; every level above must die.
    std::vector<double> lmu(std::size_t(2 * h + 2), -kInf);
    for (std::int64_t n = bottom + 1; n <= 2 * h + 1; ++n) {
        lmu[std::size_t(n)] = model.log_death(n);
        if (!std::isfinite(lmu[std::size_t(n)]) && lmu[std::size_t(n)] < 0)
            throw ModelError("mu_" + std::to_string(n) + " = 0 above the absorbing level");
        if (std::isnan(lmu[std::size_t(n)]))
            throw ModelError("mu_" + std::to_string(n) + " is not a number");
    }

    // l: median of lambda/mu over the top half of the window.
    std::vector<double> ratios, lower, upper;
    for (std::int64_t n = lo; n <= h; ++n) {
        const double r = std::exp(model.log_ratio(n));
        ratios.push_back(r);
        (n < lo + (h - lo) / 2 ? lower : upper).push_back(r);
        if (r >= 1 - tol) rep.ratio_violation = true;
    }
    rep.l_estimate = median(ratios);
    if (rep.l_estimate >= 1 - tol || rep.ratio_violation)
        rep.warnings.push_back(rep.l_estimate >= 1 - tol ? "l >= 1: theory inapplicable"
                                                         : "lambda_n/mu_n >= 1 somewhere in the window");
    if (std::abs(median(lower) - median(upper)) > 0.01 + 0.1 * rep.l_estimate)
        rep.warnings.push_back("l not stabilized over the window; increase horizon");

    // sup_{n <= h, 1 <= k <= h} mu_n / mu_{n+k} via sliding minimum of log mu on (n, n+h].
    {
        std::deque<std::int64_t> q;  // indices with increasing lmu
        double best = -kInf;
        std::int64_t next = bottom + 2;
        for (std::int64_t n = bottom + 1; n <= h; ++n) {
            for (; next <= n + h; ++next) {
                while (!q.empty() && lmu[std::size_t(q.back())] >= lmu[std::size_t(next)]) q.pop_back();
                q.push_back(next);
            }
            while (q.front() <= n) q.pop_front();
            best = std::max(best, lmu[std::size_t(n)] - lmu[std::size_t(q.front())]);
        }
        rep.growth_sup = std::exp(best);
    }

    // Sum of 1/mu: partial sum to h plus an envelope fitted on the top half of the window.
    detail::LogSum partial;
    for (std::int64_t n = bottom + 1; n <= h; ++n) partial.add(-lmu[std::size_t(n)]);
    rep.sum_inv_mu_partial = std::exp(partial.value);
    {
        std::vector<double> x, y;
        for (std::int64_t n = lo; n <= h; ++n) {
            x.push_back(std::log(double(n)));
            y.push_back(lmu[std::size_t(n)]);
        }
        const auto fit = detail::fit_line(x, y);
        rep.fitted_mu_index = fit.slope;
        const double p = fit.slope;
        const double per_step = (lmu[std::size_t(h)] - lmu[std::size_t(lo)]) / double(h - lo);
        const double inv_mu_h = std::exp(-lmu[std::size_t(h)]);
        double tail = kInf;
        if (p > 1) tail = inv_mu_h * double(h) / (p - 1);
        if (per_step > 0) tail = std::min(tail, inv_mu_h / (-std::expm1(-per_step)));
        if (p >= 1.15 && std::isfinite(tail) && tail > 0) {
            rep.sum_inv_mu = Verdict::yes;
            rep.sum_inv_mu_tail_bound = tail;
        } else if (p <= 1.02) {
            rep.sum_inv_mu = Verdict::no;
            rep.sum_inv_mu_tail_bound = kInf;
            rep.warnings.push_back("sum of 1/mu_n appears divergent: no coming down from infinity");
        } else {
            rep.sum_inv_mu = Verdict::undecided;
            rep.sum_inv_mu_tail_bound = kInf;
            rep.warnings.push_back("sum of 1/mu_n undecided at this horizon (fitted index " +
                                   format_real(p) + ")");
        }
    }

    // Extinction: sum over n of mu_1..mu_n / (lambda_1..lambda_n) must diverge.
    {
        bool zero_birth = false;
        double acc = 0, at_lo = 0;
        for (std::int64_t n = bottom + 1; n <= h && !zero_birth; ++n) {
            const double lb = model.log_birth(n);
            if (lb == -kInf) zero_birth = true;
            acc += lmu[std::size_t(n)] - lb;
            if (n == lo) at_lo = acc;
        }
        rep.extinction_condition_holds = zero_birth || acc >= at_lo;
        if (!rep.extinction_condition_holds)
            rep.warnings.push_back("absorption at 0 may fail: series in the extinction criterion looks summable");
    }
    return rep;
}

} // namespace cdfi
