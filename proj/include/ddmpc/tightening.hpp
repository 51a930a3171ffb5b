#pragma once

#include "ddmpc/constants.hpp"

#include <Eigen/Dense>

#include <vector>

namespace ddmpc {

/// Output-constraint tightening coefficients a1..a4 for k in [0, L-n-1].
struct TighteningCoefficients {
    std::vector<double> a1, a2, a3, a4;
    double noise_bound = 0.0;
    Eigen::Index horizon = 0;
    Eigen::Index order = 0;
    SystemConstants constants;

    Eigen::Index size() const { return static_cast<Eigen::Index>(a1.size()); }
};

/**
 * Base case for k in [0, n-1] (uses rho_n^max for every k), then the recursion for
 * indices k+n, k in [0, L-2n-1], evaluated in increasing k in the order
 * a1[k+n], a3[k+n], a2[k+n], a4[k+n].
 *
 * Throws ConfigError if L < 2n and DimensionError if the rho array is incomplete.
 */
TighteningCoefficients compute_coefficients(const SystemConstants& constants, double noise_bound,
                                            Eigen::Index horizon, Eigen::Index order);

struct FeasibilityPrecheck {
    /// Indices k with a4[k] >= y_max.
    std::vector<Eigen::Index> flagged;
    /// Largest noise bound (by bisection) for which no index is flagged.
    double max_admissible_noise_bound = 0.0;
    bool feasible() const { return flagged.empty(); }
};

FeasibilityPrecheck feasibility_precheck(const TighteningCoefficients& coeffs, double y_max,
                                         int bisection_iterations = 20);

/// a1[k] |u|_1 + a2[k] |alpha|_1 + a3[k] |sigma|_inf + a4[k]
double tightened_margin(const TighteningCoefficients& coeffs, Eigen::Index k, double u_one,
                        double alpha_one, double sigma_inf);

} // namespace ddmpc
