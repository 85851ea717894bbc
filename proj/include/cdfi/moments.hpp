#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cdfi/rates.hpp"

namespace cdfi {

// m_n = E_{n+1}[T_n] by the series sum of (1/mu_{i+1}) prod lambda_{j+1}/mu_{j+1}.
// tol is relative.  Throws ConvergenceError when the series looks divergent.
double tau_mean(const RateModel& model, std::int64_t n, double tol = 1e-12);
double log_tau_mean(const RateModel& model, std::int64_t n, double tol = 1e-12);

struct TableRow {
    std::int64_t n = 0;
    double log_pi = 0;
    double m = 0, log_m = 0;
    double E_inf_T = 0, log_E_inf_T = 0;
    double second = 0, third = 0;     // E[tau_n^2], E[tau_n^3]
    double log_second = 0, log_third = 0;
    double var_tau = 0;
    double third_central_bound = 0;   // >= E|tau_n - m_n|^3
    double var_T = 0, log_var_T = 0;
    double third_sum = 0;             // sum_{k>=n} third_central_bound_k
    double r = 0;                     // m_n / E_inf_T_n
};

// Per-level hitting-time quantities for the chain started from infinity.
class AnalysisTable {
public:
    static AnalysisTable build(const RateModel& model, std::int64_t n_min, std::int64_t n_max,
                               double tol = 1e-9);

    const RateModel& model() const noexcept { return model_; }
    std::int64_t n_min() const noexcept { return n_min_; }
    std::int64_t n_max() const noexcept { return n_max_; }
    const std::vector<TableRow>& rows() const noexcept { return rows_; }
    const TableRow& at(std::int64_t n) const;
    bool contains(std::int64_t n) const noexcept { return n >= n_min_ && n <= n_max_; }

    double S() const noexcept { return S_; }
    std::int64_t truncation_level() const noexcept { return truncation_; }
    double tol() const noexcept { return tol_; }
    // Relative change of the tail sums at the last truncation doubling.
    double tail_change() const noexcept { return tail_change_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    // |1 - (lambda_n/mu_n)(m_n/m_{n-1}) - 1/(mu_n m_{n-1})|, needs n-1 in the table.
    double m_recursion_residual(std::int64_t n) const;
    // |E tau_{n-1}^2 - (lambda_n/mu_n) E tau_n^2 - 2 m_{n-1}^2| / E tau_{n-1}^2
    double second_moment_residual(std::int64_t n) const;

    // Header n,log_pi,m_n,E_inf_T,var_tau,var_T,r_n
    void write_csv(std::ostream& os) const;

private:
    AnalysisTable(const RateModel& m) : model_(m) {}
    RateModel model_;
    std::int64_t n_min_ = 0, n_max_ = 0, truncation_ = 0;
    double S_ = 0, tol_ = 0, tail_change_ = 0;
    std::vector<TableRow> rows_;
    std::vector<std::string> warnings_;
};

double hitting_mean_from_infinity(const RateModel& model, std::int64_t n, double tol = 1e-9);

struct TauMoments {
    double second = 0, third = 0;
};
TauMoments tau_higher_moments(const RateModel& model, std::int64_t n, double tol = 1e-9);

double var_T_from_infinity(const RateModel& model, std::int64_t n, double tol = 1e-9);

// v(t) = inf{n : E_inf[T_n] <= t}, with v(t) = 1 for t >= E_inf[T_1].  Grows its table on demand.
class SpeedFunction {
public:
    explicit SpeedFunction(const RateModel& model, double tol = 1e-9);
    std::int64_t operator()(double t);
    double E_inf_T(std::int64_t n);
    const AnalysisTable& table() const noexcept { return table_; }

private:
    void grow(std::int64_t n_max);
    RateModel model_;
    double tol_;
    AnalysisTable table_;
};

std::int64_t speed(const RateModel& model, double t, double tol = 1e-9);

} // namespace cdfi
