#include "ddmpc/error.hpp"
#include "ddmpc/tightening.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ddmpc;
using Eigen::Index;

namespace {

SystemConstants example_constants()
{
    return SystemConstants::make(3, 10, 38.395155921055604, fixtures::example_rho(), 8.5, 60.0);
}

} // namespace

TEST(Tightening, MatchesIndependentRecursion)
{
    // computed with a separate numpy implementation from the same constants
    const std::vector<double> a1{0.0, 0.0, 0.0, 0.0150773, 0.0150773, 0.0150773, 0.036066204692808065};
    const std::vector<double> a2{0.0008869, 0.0008869, 0.0008869, 0.0012346414525181216,
                                 0.0011380804525181216, 0.0009435373525181216, 0.0011376161367977172};
    const std::vector<double> a3{8.869, 8.869, 8.869, 12.346414525181215, 11.380804525181215,
                                 9.435373525181216, 11.376161367977172};
    const std::vector<double> a4{0.0007869, 0.0007869, 0.0007869, 0.9073885519240813,
                                 0.9072919909240813, 0.9070974478240813, 2.1688566143266153};
    const TighteningCoefficients c = compute_coefficients(example_constants(), 1e-4, 10, 3);
    ASSERT_EQ(c.size(), 7);
    for (Index k = 0; k < 7; ++k) {
        EXPECT_NEAR(c.a1[k], a1[k], 1e-12 * std::max(1.0, a1[k])) << k;
        EXPECT_NEAR(c.a2[k], a2[k], 1e-12 * std::max(1.0, a2[k])) << k;
        EXPECT_NEAR(c.a3[k], a3[k], 1e-12 * a3[k]) << k;
        EXPECT_NEAR(c.a4[k], a4[k], 1e-12 * std::max(1.0, a4[k])) << k;
    }
}

TEST(Tightening, StructuralProperties)
{
    const SystemConstants k = example_constants();
    const std::vector<double> eps{1e-5, 1e-4, 1e-3};
    std::vector<TighteningCoefficients> cs;
    for (double e : eps)
        cs.push_back(compute_coefficients(k, e, 10, 3));
    for (std::size_t i = 0; i < eps.size(); ++i)
        for (Index j = 0; j < 7; ++j)
            EXPECT_EQ(cs[i].a2[j], eps[i] * cs[i].a3[j]);
    for (std::size_t i = 1; i < eps.size(); ++i)
        for (Index j = 0; j < 7; ++j) {
            EXPECT_GE(cs[i].a1[j], cs[i - 1].a1[j]);
            EXPECT_GE(cs[i].a2[j], cs[i - 1].a2[j]);
            EXPECT_GE(cs[i].a4[j], cs[i - 1].a4[j]);
            if (j >= 3) {
                EXPECT_GT(cs[i].a1[j], cs[i - 1].a1[j]);
                EXPECT_GT(cs[i].a4[j], cs[i - 1].a4[j]);
            }
        }
}

TEST(Tightening, NoiseFreeLimit)
{
    const SystemConstants k = example_constants();
    const TighteningCoefficients c = compute_coefficients(k, 0.0, 10, 3);
    for (Index j = 0; j < c.size(); ++j) {
        EXPECT_EQ(c.a1[j], 0.0);
        EXPECT_EQ(c.a2[j], 0.0);
        EXPECT_EQ(c.a4[j], 0.0);
        if (j >= 3)
            EXPECT_EQ(c.a3[j], 1.0 + k.rho_at(3 + j));
        else
            EXPECT_EQ(c.a3[j], 1.0 + k.rho_n_max);
    }
}

TEST(Tightening, Validation)
{
    const SystemConstants k = example_constants();
    EXPECT_THROW(compute_coefficients(k, 1e-4, 5, 3), ConfigError);
    EXPECT_THROW(compute_coefficients(k, -1e-4, 10, 3), ConfigError);
    const SystemConstants short_rho = SystemConstants::make(3, 6, 1.0, {1, 1, 1, 1, 1, 1}, 1.0, 1.0);
    EXPECT_THROW(compute_coefficients(short_rho, 1e-4, 10, 3), DimensionError);
}

TEST(Tightening, PrecheckFindsAdmissibleNoiseBound)
{
    const TighteningCoefficients c = compute_coefficients(example_constants(), 1e-4, 10, 3);
    const FeasibilityPrecheck ok = feasibility_precheck(c, 10.0);
    EXPECT_TRUE(ok.feasible());
    EXPECT_GT(ok.max_admissible_noise_bound, 1e-4);
    const FeasibilityPrecheck bad = feasibility_precheck(c, 1.0);
    EXPECT_FALSE(bad.feasible());
    EXPECT_EQ(bad.flagged.front(), 6);
    EXPECT_LT(bad.max_admissible_noise_bound, 1e-4);
    // the bisection result is admissible and a slightly larger bound is not
    const double e = bad.max_admissible_noise_bound;
    const auto a4_max = [&](double eps) {
        const TighteningCoefficients t = compute_coefficients(example_constants(), eps, 10, 3);
        return *std::max_element(t.a4.begin(), t.a4.end());
    };
    EXPECT_LT(a4_max(e), 1.0);
    EXPECT_GE(a4_max(e * 1.01), 1.0);
}

TEST(Tightening, MarginCombinesNorms)
{
    const TighteningCoefficients c = compute_coefficients(example_constants(), 1e-4, 10, 3);
    const double m = tightened_margin(c, 4, 2.0, 3.0, 0.5);
    EXPECT_DOUBLE_EQ(m, c.a1[4] * 2.0 + c.a2[4] * 3.0 + c.a3[4] * 0.5 + c.a4[4]);
    EXPECT_THROW(tightened_margin(c, 7, 0, 0, 0), DimensionError);
}
