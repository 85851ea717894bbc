#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "cdfi/rates.hpp"

namespace cdfi {

// G_n(a) = E_{n+1}[exp(-a T_n)], bracketed between seeds 0 and 1 at a truncation level that is
// doubled until the bracket width is <= tol.
double laplace_G(const RateModel& model, std::int64_t n, double a, double tol = 1e-12);

// phi(a) = E_inf[exp(-a T_0)] (T_1 for Kingman).  log_laplace_T0 avoids underflow for large a;
// tol bounds the enclosure width of log phi relative to max(1, |log phi|).
double log_laplace_T0(const RateModel& model, double a, double tol = 1e-10);
double laplace_T0(const RateModel& model, double a, double tol = 1e-10);

struct LimitLaw {
    double l = 0, alpha = 1, tol = 0;
    std::vector<std::pair<double, double>> grid;  // (a, G(a))
    std::vector<double> sup_change;               // per Jacobi sweep
    double max_residual = 0;

    void write_csv(std::ostream& os) const;  // header a,G
};

// Solves G(a) [1 + l(1 - G(a(1-alpha))) + a(1 - l(1-alpha))] = 1 on the cascades of a_grid.
LimitLaw limit_law_fixed_point(double l, double alpha, std::span<const double> a_grid, double tol = 1e-12);
double limit_law_G(double l, double alpha, double a, double tol = 1e-12);
// Transform of Z = sum_k alpha (1-alpha)^k Z_k: prod_k G(a alpha (1-alpha)^k).
double limit_Z_transform(double l, double alpha, double a, double tol = 1e-12);

} // namespace cdfi
