#include "cdfi/regvar.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cdfi/detail/logmath.hpp"
#include "cdfi/error.hpp"

namespace cdfi {

IndexFit rv_index(std::span<const double> values, std::int64_t n0) {
    if (values.size() < 30) throw std::invalid_argument("rv_index: need at least 30 samples");
    if (n0 < 1) throw std::invalid_argument("rv_index: indices must start at n0 >= 1");
    for (double v : values)
        if (!(v > 0) || !std::isfinite(v)) throw std::invalid_argument("rv_index: values must be finite and positive");
    std::vector<double> x, z, y;
    for (std::size_t i = values.size() / 2; i < values.size(); ++i) {
        const double n = double(n0) + double(i);
        x.push_back(std::log(n));
        z.push_back(std::log(std::log(std::max(n, 2.0))));
        y.push_back(std::log(values[i]));
    }
    const auto plain = detail::fit_line(x, y);
    IndexFit fit{plain.slope, plain.intercept, plain.rms_residual, x.size(), plain.slope, 0.0};

    // Second regressor log log n absorbs slowly varying factors (log n)^gamma, which otherwise bias
    // the slope by gamma / log n.  Used only when the design is well conditioned.
    const std::size_t m = x.size();
    double mx = 0, mz = 0, my = 0;
    for (std::size_t i = 0; i < m; ++i) {
        mx += x[i];
        mz += z[i];
        my += y[i];
    }
    mx /= double(m);
    mz /= double(m);
    my /= double(m);
    double sxx = 0, szz = 0, sxz = 0, sxy = 0, szy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double dx = x[i] - mx, dz = z[i] - mz, dy = y[i] - my;
        sxx += dx * dx;
        szz += dz * dz;
        sxz += dx * dz;
        sxy += dx * dy;
        szy += dz * dy;
    }
    const double det = sxx * szz - sxz * sxz;
    if (!(det > 1e-10 * sxx * szz)) return fit;
    const double rho = (szz * sxy - sxz * szy) / det;
    const double gamma = (sxx * szy - sxz * sxy) / det;
    double ss = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = (y[i] - my) - rho * (x[i] - mx) - gamma * (z[i] - mz);
        ss += r * r;
    }
    fit.index = rho;
    fit.log_exponent = gamma;
    fit.intercept = my - rho * mx - gamma * mz;
    fit.residual = std::sqrt(ss / double(m));
    return fit;
}

TailSumCheck rv_tail_sum_check(const std::function<double(std::int64_t)>& g, std::int64_t n) {
    if (n < 30) throw std::invalid_argument("rv_tail_sum_check: n must be >= 30");
    std::vector<double> v;
    for (std::int64_t k = n; k <= 2 * n; ++k) v.push_back(g(k));
    const double rho = rv_index(v, n).index;
    if (rho >= -1 - 1e-6) throw ConvergenceError("tail sum divergent: fitted index " + std::to_string(rho) + " >= -1");

    // Partial sum to M, Euler-Maclaurin tail with the local index at M.
    const std::int64_t M = std::min<std::int64_t>(1000 * n, 100'000'000);
    double s = 0, c = 0;  // Kahan
    for (std::int64_t k = n; k <= M; ++k) {
        const double y = g(k) - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    const double gM = g(M);
    const double local = std::log(g(M + 1) / g(M - 1)) / std::log(double(M + 1) / double(M - 1));
    const double Md = double(M);
    s += gM * std::pow(Md, -local) * std::pow(Md + 0.5, local + 1) / -(local + 1);
    return {s, -double(n) * g(n) / (rho + 1), rho};
}

} // namespace cdfi
