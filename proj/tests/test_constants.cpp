#include "ddmpc/constants.hpp"
#include "ddmpc/error.hpp"
#include "ddmpc/polytope.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ddmpc;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const DataRecord& shared_data()
{
    static const DataRecord d = fixtures::example_data();
    return d;
}

} // namespace

TEST(Constants, RhoEstimatesMatchOracle)
{
    const auto& rho = fixtures::example_rho();
    for (Index k = 3; k <= 12; ++k) {
        const double est = estimate_rho(shared_data(), 3, k);
        EXPECT_NEAR(est, rho[k - 3], 1e-6) << "k = " << k;
        EXPECT_LE(est, rho[k - 3] + 1e-8);
    }
    const std::vector<double> range = estimate_rho_range(shared_data(), 3, 10);
    ASSERT_EQ(range.size(), 10u);
    for (std::size_t i = 0; i < range.size(); ++i)
        EXPECT_NEAR(range[i], rho[i], 1e-6);
}

TEST(Constants, RhoOnRandomMimoSystem)
{
    std::mt19937_64 gen(21);
    const StateSpaceModel sys = fixtures::random_model(3, 2, 2, gen);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const MatrixXd u = MatrixXd::NullaryExpr(2, 300, [&] { return ud(gen); });
    const MatrixXd y = simulate(sys, VectorXd::Zero(3), u).trajectory.y;
    // with p > 1 the free responses fill only part of the window box, so the
    // pseudoinverse expression is an upper bound
    for (Index k : {3, 5, 8}) {
        const double est = estimate_rho(u, y, 3, k);
        EXPECT_LE(est, rho_oracle(sys, k) + 1e-6);
        EXPECT_GT(est, 0.0);
    }
    EXPECT_NEAR(estimate_gamma(u, y, 3).value, gamma_oracle(sys), 1e-6);
}

TEST(Constants, RhoEqualsVertexEnumeration)
{
    // max of |C A^k x|_inf over states whose first n outputs lie in the unit box,
    // evaluated at the vertices of that polytope
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Index p = 1 + trial % 2;
        const StateSpaceModel sys = fixtures::random_model(3, 1, p, gen);
        const MatrixXd u = MatrixXd::NullaryExpr(1, 200, [&] { return ud(gen); });
        const MatrixXd y = simulate(sys, VectorXd::Zero(3), u).trajectory.y;
        const MatrixXd Phi = sys.observability_matrix();
        Eigen::JacobiSVD<MatrixXd> svd(Phi, Eigen::ComputeThinU);
        const PolytopeVertexSet vs = enumerate_box_subspace_vertices(svd.matrixU().leftCols(3), 1.0);
        for (Index k : {3, 6}) {
            MatrixXd Ak = MatrixXd::Identity(3, 3);
            for (Index i = 0; i < k; ++i)
                Ak = Ak * sys.A();
            double brute = 0.0;
            for (const VectorXd& w : vs.vertices) {
                const VectorXd x = Phi.colPivHouseholderQr().solve(w);
                brute = std::max(brute, (sys.C() * Ak * x).lpNorm<Eigen::Infinity>());
            }
            EXPECT_NEAR(estimate_rho(u, y, 3, k), brute, 1e-6 * std::max(1.0, brute))
                << "trial " << trial << ", k = " << k;
        }
    }
}

TEST(Constants, GammaEstimateMatchesOracle)
{
    const GammaEstimate g = estimate_gamma(shared_data(), 3);
    EXPECT_NEAR(g.value, fixtures::kExampleGamma, 1e-6);
    EXPECT_EQ(g.vertices.vertices.size(), 8u);
    EXPECT_EQ(g.vertex_costs.size(), 8u);
    EXPECT_DOUBLE_EQ(*std::max_element(g.vertex_costs.begin(), g.vertex_costs.end()), g.value);
}

TEST(Constants, SteeringInputsRespectGamma)
{
    const StateSpaceModel sys = fixtures::example_plant();
    const DataRecord& d = shared_data();
    const MatrixXd u_data = d.inputs(), y_data = d.outputs(DataView::clean);
    const double gamma = fixtures::kExampleGamma;
    const MatrixXd Phi = sys.observability_matrix();
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> ud(-5.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        const VectorXd x0 = VectorXd::NullaryExpr(3, [&] { return ud(gen); });
        const MatrixXd u = MatrixXd::NullaryExpr(1, 3, [&] { return ud(gen); });
        const SimulationResult sim = simulate(sys, x0, u);
        const VectorXd x = sim.states.col(3);
        const MatrixXd steer = steering_input(u_data, y_data, 3, sim.trajectory);
        EXPECT_LE(steer.cwiseAbs().sum(), gamma * (Phi * x).lpNorm<Eigen::Infinity>() + 1e-8);
        const VectorXd x_end = simulate(sys, x, steer).states.col(3);
        EXPECT_LE(x_end.lpNorm<Eigen::Infinity>(), 1e-7);
    }
}

TEST(Constants, InsufficientDataIsReported)
{
    const StateSpaceModel sys = fixtures::example_plant();
    MatrixXd u = MatrixXd::Ones(1, 40);
    const MatrixXd y = simulate(sys, VectorXd::Zero(3), u).trajectory.y;
    EXPECT_THROW(estimate_rho(u, y, 3, 5), EstimationError);
    EXPECT_THROW(estimate_gamma(u, y, 3), EstimationError);
}

TEST(Constants, CpeMatchesNormalEquations)
{
    const MatrixXd H = build_h_uxi(shared_data(), DataView::noisy, 10);
    const MatrixXd right_inverse = H.transpose() * (H * H.transpose()).llt().solve(MatrixXd::Identity(19, 19));
    const double expected = right_inverse.cwiseAbs().colwise().sum().maxCoeff();
    EXPECT_NEAR(compute_cpe(shared_data(), DataView::noisy, 10), expected, 1e-9 * expected);
}

TEST(Constants, XiMaxClosedForm)
{
    EXPECT_DOUBLE_EQ(compute_xi_max(VectorXd::Constant(1, -10.0), VectorXd::Constant(1, 10.0), 10.0, 1, 3),
                     60.0);
    VectorXd lo(2), hi(2);
    lo << -1.0, -3.0;
    hi << 2.0, 1.0;
    EXPECT_DOUBLE_EQ(compute_xi_max(lo, hi, 0.5, 2, 2), 2.0 * (2.0 + 3.0 + 1.0));
}

TEST(Constants, MakeValidatesAndComputesMaxima)
{
    const SystemConstants c = SystemConstants::make(3, 10, fixtures::kExampleGamma,
                                                    fixtures::example_rho(), 8.5, 60.0);
    EXPECT_DOUBLE_EQ(c.rho_n_max, 7.868999999999991);
    EXPECT_DOUBLE_EQ(c.rho_L_max, 4.590846242100023);
    EXPECT_DOUBLE_EQ(c.rho_at(3), 3.899999999999995);
    EXPECT_THROW(c.rho_at(2), DimensionError);
    EXPECT_THROW(c.rho_at(13), DimensionError);
    EXPECT_THROW(SystemConstants::make(3, 10, 1.0, {1.0, 2.0}, 1.0, 1.0), DimensionError);
    EXPECT_THROW(SystemConstants::make(3, 10, -1.0, fixtures::example_rho(), 1.0, 1.0), ConfigError);
}

TEST(Constants, EstimatedAndOracleConstantsAgree)
{
    const VectorXd lo = VectorXd::Constant(1, -10.0), hi = VectorXd::Constant(1, 10.0);
    const SystemConstants est = estimate_constants(shared_data(), 3, 10, lo, hi, 10.0, DataView::noisy);
    const SystemConstants orc = oracle_constants(fixtures::example_plant(), shared_data(), 10, lo, hi,
                                                 10.0, DataView::noisy);
    EXPECT_EQ(est.gamma_source, Provenance::data_driven);
    EXPECT_EQ(orc.rho_source, Provenance::model_oracle);
    EXPECT_EQ(orc.xi_max_source, Provenance::closed_form);
    EXPECT_NEAR(est.gamma, orc.gamma, 1e-6);
    EXPECT_DOUBLE_EQ(est.c_pe, orc.c_pe);
    EXPECT_DOUBLE_EQ(est.xi_max, 60.0);
    for (std::size_t i = 0; i < est.rho.size(); ++i)
        EXPECT_NEAR(est.rho[i], orc.rho[i], 1e-6);
    EXPECT_EQ(provenance_from_string(to_string(Provenance::from_file)), Provenance::from_file);
    EXPECT_THROW(provenance_from_string("guess"), ConfigError);
}
