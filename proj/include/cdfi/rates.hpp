#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdfi/params.hpp"

namespace cdfi {

enum class Family {
    kingman,
    power,
    logistic,
    factorial,
    exponential,
    alternating,
    marginal,
    pure_death_power,
    custom,
};

std::string_view family_name(Family f);
std::optional<Family> parse_family(std::string_view name);
const std::vector<std::string>& preset_names();

// Birth-death rate sequences (lambda_n, mu_n).  Rates are evaluated lazily and
// in log space: log_death(n) == -inf means mu_n == 0.  Immutable.
class RateModel {
public:
    static RateModel preset(std::string_view name, const ParamList& params = {});
    static RateModel from_text(std::string_view text);
    static RateModel from_file(const std::string& path);

    const std::string& name() const noexcept { return name_; }
    Family family() const noexcept { return family_; }
    const ParamList& params() const noexcept { return params_; }
    std::optional<double> claimed_rv_index() const noexcept { return claimed_index_; }

    double log_birth(std::int64_t n) const noexcept;
    double log_death(std::int64_t n) const noexcept;
    double birth(std::int64_t n) const noexcept;
    double death(std::int64_t n) const noexcept;
    // log(lambda_n / mu_n); -inf for pure death.
    double log_ratio(std::int64_t n) const noexcept { return log_birth(n) - log_death(n); }

    // Lowest level the chain can reach: 0, except Kingman where mu_1 = 0.
    std::int64_t absorbing_level() const noexcept { return family_ == Family::kingman ? 1 : 0; }
    bool pure_death() const noexcept { return pure_death_; }

    // Canonical "family;k=v;..." text, stable across runs (used for digests).
    std::string canonical() const;
    // key = value text accepted by from_text().
    std::string to_text() const;

private:
    RateModel() = default;
    void configure();

    std::string name_;
    Family family_ = Family::custom;
    ParamList params_;
    std::optional<double> claimed_index_;
    bool pure_death_ = false;
    // Family coefficients, meaning depends on family_.
    double c0_ = 0, c1_ = 0, c2_ = 0, c3_ = 0, c4_ = 0, c5_ = 0;
    bool ratio_birth_ = false;
};

enum class Verdict { yes, no, undecided };
std::string_view verdict_name(Verdict v);

struct AssumptionReport {
    double l_estimate = 0;
    std::int64_t window_lo = 0, window_hi = 0;
    double growth_sup = 0;        // sup mu_n / mu_{n+k}, k <= horizon
    Verdict sum_inv_mu = Verdict::undecided;
    double sum_inv_mu_partial = 0;
    double sum_inv_mu_tail_bound = 0;  // +inf unless convergent
    double fitted_mu_index = 0;
    bool ratio_violation = false;  // some lambda/mu >= 1 - tol in the window
    bool extinction_condition_holds = true;
    std::vector<std::string> warnings;

    bool sum_inv_mu_converges() const noexcept { return sum_inv_mu == Verdict::yes; }
};

AssumptionReport check_assumptions(const RateModel& model, std::int64_t horizon = 10000,
                                   double tol = 1e-9);

} // namespace cdfi
