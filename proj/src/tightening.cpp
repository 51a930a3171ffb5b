#include "ddmpc/tightening.hpp"

#include "ddmpc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ddmpc {

using Eigen::Index;

TighteningCoefficients compute_coefficients(const SystemConstants& constants, double noise_bound,
                                            Index horizon, Index order)
{
    const Index n = order, L = horizon;
    if (n < 1 || L < 2 * n)
        throw ConfigError("tightening needs L >= 2n (L = " + std::to_string(L) +
                          ", n = " + std::to_string(n) + ")");
    if (!(noise_bound >= 0.0) || !std::isfinite(noise_bound))
        throw ConfigError("noise bound must be finite and non-negative");
    if (constants.order != n || static_cast<Index>(constants.rho.size()) < L)
        throw DimensionError("constants do not cover rho_k for k in [n, L+n-1]");

    const double eps = noise_bound;
    const double rho_n = constants.rho_n_max;
    const double rho_L = constants.rho_L_max;
    const double cpe = constants.c_pe;
    const double gamma = constants.gamma;

    TighteningCoefficients c;
    c.noise_bound = eps;
    c.horizon = L;
    c.order = n;
    c.constants = constants;
    const auto size = static_cast<std::size_t>(L - n);
    c.a1.assign(size, 0.0);
    c.a2.assign(size, 0.0);
    c.a3.assign(size, 0.0);
    c.a4.assign(size, 0.0);

    for (Index k = 0; k < n; ++k) {
        c.a1[k] = 0.0;
        c.a3[k] = 1.0 + rho_n;
        c.a2[k] = eps * c.a3[k];
        c.a4[k] = eps * rho_n;
    }
    for (Index k = 0; k + 2 * n < L; ++k) {
        const double rho_2nk = constants.rho_at(2 * n + k);
        const double carry = (c.a2[k] + c.a3[k] * eps) * cpe;
        c.a1[k + n] = c.a1[k] + carry;
        c.a3[k + n] = 1.0 + rho_2nk + gamma * (1.0 + rho_L) * c.a1[k + n];
        c.a2[k + n] = eps * c.a3[k + n];
        c.a4[k + n] = c.a4[k] + eps * rho_2nk + eps * c.a1[k + n] * gamma * rho_L +
                      eps * c.a3[k] + carry * constants.xi_max;
    }
    return c;
}

FeasibilityPrecheck feasibility_precheck(const TighteningCoefficients& coeffs, double y_max,
                                         int bisection_iterations)
{
    FeasibilityPrecheck out;
    for (Index k = 0; k < coeffs.size(); ++k)
        if (coeffs.a4[k] >= y_max)
            out.flagged.push_back(k);

    auto admissible = [&](double eps) {
        const TighteningCoefficients c =
            compute_coefficients(coeffs.constants, eps, coeffs.horizon, coeffs.order);
        return std::all_of(c.a4.begin(), c.a4.end(), [&](double a) { return a < y_max; });
    };
    if (!std::isfinite(y_max)) {
        out.max_admissible_noise_bound = std::numeric_limits<double>::infinity();
        return out;
    }
    double lo = 0.0;
    double hi = coeffs.noise_bound > 0.0 ? coeffs.noise_bound : 1e-6;
    for (int i = 0; i < 200 && admissible(hi); ++i) {
        lo = hi;
        hi *= 2.0;
    }
    for (int i = 0; i < bisection_iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        (admissible(mid) ? lo : hi) = mid;
    }
    out.max_admissible_noise_bound = lo;
    return out;
}

double tightened_margin(const TighteningCoefficients& coeffs, Index k, double u_one,
                        double alpha_one, double sigma_inf)
{
    if (k < 0 || k >= coeffs.size())
        throw DimensionError("tightening index " + std::to_string(k) + " out of range");
    return coeffs.a1[k] * u_one + coeffs.a2[k] * alpha_one + coeffs.a3[k] * sigma_inf +
           coeffs.a4[k];
}

} // namespace ddmpc
