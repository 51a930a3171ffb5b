#include "ddmpc/error.hpp"
#include "ddmpc/mpc.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ddmpc;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct MpcSetup {
    DataRecord data;
    SystemConstants constants;
    TighteningCoefficients coeffs;
    std::shared_ptr<const PredictionData> prediction;
    MpcConfig config;
};

MpcSetup make_setup(double noise_bound, StageCost cost, double u_s, double y_s)
{
    const VectorXd lo = VectorXd::Constant(1, -10.0), hi = VectorXd::Constant(1, 10.0);
    DataRecord data = fixtures::example_data(noise_bound);
    SystemConstants k = oracle_constants(fixtures::example_plant(), data, 10, lo, hi, 10.0, DataView::noisy);
    TighteningCoefficients c = compute_coefficients(k, noise_bound, 10, 3);
    auto pred = std::make_shared<const PredictionData>(PredictionData::from_record(data, 10, 3));
    MpcConfig cfg;
    cfg.horizon = 10;
    cfg.order = 3;
    cfg.noise_bound = noise_bound;
    cfg.lambda_alpha = noise_bound > 0.0 ? 1.0 / noise_bound : 0.0;
    cfg.lambda_sigma = 100.0;
    cfg.stage_cost = std::move(cost);
    cfg.u_lower = lo;
    cfg.u_upper = hi;
    cfg.y_max = 10.0;
    cfg.u_setpoint = VectorXd::Constant(1, u_s);
    cfg.y_setpoint = VectorXd::Constant(1, y_s);
    return MpcSetup{std::move(data), std::move(k), std::move(c), std::move(pred), std::move(cfg)};
}

StageCost unit_quadratic() { return StageCost::quadratic(MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1)); }
StageCost maximize_output() { return StageCost::linear(VectorXd::Zero(1), VectorXd::Constant(1, -1.0)); }

InitialWindow rest_window() { return InitialWindow{MatrixXd::Zero(1, 3), MatrixXd::Zero(1, 3)}; }

} // namespace

TEST(Mpc, LayoutAndSizes)
{
    const MpcSetup s = make_setup(1e-4, maximize_output(), 5.0, 5.0);
    const AssembledMpc a = assemble(s.config, *s.prediction, s.coeffs, rest_window());
    const MpcLayout& l = a.layout;
    EXPECT_EQ(l.num_alpha, 988);
    EXPECT_EQ(l.num_sigma, 13);
    EXPECT_EQ(l.num_u, 13);
    EXPECT_EQ(l.num_u_abs, 10);
    EXPECT_EQ(l.tightened_count, 2 * 7);
    EXPECT_EQ(l.num_vars, a.qp.num_vars());
    EXPECT_NO_THROW(solver::validate(a.qp));
}

TEST(Mpc, NoiseFreeOriginIsOptimal)
{
    const MpcSetup s = make_setup(0.0, unit_quadratic(), 0.0, 0.0);
    ControllerState ctrl(s.config, s.prediction, s.coeffs, rest_window());
    const MpcSolution sol = solve_step(ctrl);
    ASSERT_TRUE(sol.optimal()) << sol.report.message;
    EXPECT_LE(sol.cost, 1e-10);
    EXPECT_LE(sol.sigma_inf, 1e-8);
    EXPECT_LE(sol.u_bar.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Mpc, NoiseFreePredictionsAreTrajectories)
{
    const MpcSetup s = make_setup(0.0, unit_quadratic(), 2.0, 1.84); // a true equilibrium
    const StateSpaceModel sys = fixtures::example_plant();
    // window from a simulated past, so the current state is known
    const MatrixXd u_past = (MatrixXd(1, 3) << 1.0, -2.0, 0.5).finished();
    const SimulationResult past = simulate(sys, VectorXd::Zero(3), u_past);
    ControllerState ctrl(s.config, s.prediction, s.coeffs, InitialWindow{u_past, past.trajectory.y});
    const MpcSolution sol = solve_step(ctrl);
    ASSERT_TRUE(sol.optimal()) << sol.report.message;
    // sigma may trade tracking error for its penalty, but y-bar + sigma is the data prediction
    const MatrixXd y_data = sol.y_bar + sol.sigma.transpose();
    EXPECT_LE(membership_residual(s.data, Trajectory(sol.u_bar, y_data)).residual, 1e-7);
    // model check: the state behind the first n samples reproduces all of them
    const MatrixXd forced = simulate(sys, VectorXd::Zero(3), sol.u_bar.leftCols(3)).trajectory.y;
    const VectorXd free_part = (y_data.leftCols(3) - forced).transpose();
    const VectorXd x0 = sys.observability_matrix().colPivHouseholderQr().solve(free_part);
    const MatrixXd rollout = simulate(sys, x0, sol.u_bar).trajectory.y;
    EXPECT_LE((rollout - y_data).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LE((sol.u_bar.rightCols(3).array() - 2.0).abs().maxCoeff(), 1e-8);
}

TEST(Mpc, SolvesAreDeterministic)
{
    const MpcSetup s = make_setup(1e-4, maximize_output(), 5.0, 5.0);
    ControllerState ctrl(s.config, s.prediction, s.coeffs, rest_window());
    const MpcSolution a = solve_step(ctrl);
    const MpcSolution b = solve_step(ctrl);
    ASSERT_TRUE(a.optimal());
    EXPECT_EQ(a.u_bar, b.u_bar);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.cost, b.cost);
}

TEST(Mpc, CostScalingKeepsMinimizer)
{
    MpcSetup s = make_setup(1e-4, unit_quadratic(), 1.0, 1.0);
    ControllerState ctrl(s.config, s.prediction, s.coeffs, rest_window());
    const MpcSolution a = solve_step(ctrl);
    MpcConfig scaled = s.config;
    scaled.stage_cost = StageCost::quadratic(3.0 * MatrixXd::Identity(1, 1), 3.0 * MatrixXd::Identity(1, 1));
    scaled.lambda_alpha *= 3.0;
    scaled.lambda_sigma *= 3.0;
    ControllerState ctrl3(scaled, s.prediction, s.coeffs, rest_window());
    const MpcSolution b = solve_step(ctrl3);
    ASSERT_TRUE(a.optimal());
    ASSERT_TRUE(b.optimal());
    EXPECT_NEAR(b.cost, 3.0 * a.cost, 1e-6 * std::max(1.0, std::abs(a.cost)));
    EXPECT_LE((a.u_bar - b.u_bar).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Mpc, TightenedConstraintsHoldWithTrueNorms)
{
    const MpcSetup s = make_setup(1e-4, maximize_output(), 5.0, 5.0);
    ControllerState ctrl(s.config, s.prediction, s.coeffs, rest_window());
    const MpcSolution sol = solve_step(ctrl);
    ASSERT_TRUE(sol.optimal());
    EXPECT_GE(sol.min_tightened_slack, -1e-6);
    EXPECT_NEAR(sol.t_alpha, sol.alpha_one, 1e-6);
    EXPECT_NEAR(sol.t_sigma, sol.sigma_inf, 1e-6);
    EXPECT_NEAR(sol.t_u, sol.u_one, 1e-6);
    // input box and terminal equality
    EXPECT_LE(sol.u_bar.cwiseAbs().maxCoeff(), 10.0 + 1e-8);
    EXPECT_NEAR(sol.u_bar(0, 12), 5.0, 1e-8);
    EXPECT_NEAR(sol.y_bar(0, 12), 5.0, 1e-8);
}

TEST(Mpc, PredictionErrorBoundHoldsFromRest)
{
    const MpcSetup s = make_setup(1e-4, maximize_output(), 5.0, 5.0);
    ControllerState ctrl(s.config, s.prediction, s.coeffs,
                         InitialWindow{MatrixXd::Zero(1, 3), draw_noise({1e-4}, 1, 3)});
    const MpcSolution sol = solve_step(ctrl);
    ASSERT_TRUE(sol.optimal());
    const PredictionDiagnostic d =
        prediction_error_diagnostic(sol, fixtures::example_plant(), VectorXd::Zero(3), s.constants, 1e-4);
    EXPECT_EQ(d.violations, 0);
    EXPECT_LT(d.max_ratio, 1.0);
}

TEST(Mpc, ApplyShiftsWindowAndTime)
{
    const MpcSetup s = make_setup(1e-4, maximize_output(), 5.0, 5.0);
    ControllerState ctrl(s.config, s.prediction, s.coeffs, rest_window());
    const MpcSolution sol = solve_step(ctrl);
    const MatrixXd u = n_step_apply(ctrl, sol);
    EXPECT_EQ(ctrl.time(), 3);
    EXPECT_EQ(u, sol.u_bar.middleCols(3, 3));
    const MatrixXd y = (MatrixXd(1, 3) << 0.1, 0.2, 0.3).finished();
    ctrl.push(u.rightCols(2), y.rightCols(2));
    EXPECT_EQ(ctrl.window().u(0, 0), 0.0);
    EXPECT_EQ(ctrl.window().u.rightCols(2), u.rightCols(2));
    EXPECT_EQ(ctrl.window().y(0, 2), 0.3);

    MpcSolution failed;
    failed.report.status = solver::SolveStatus::infeasible;
    EXPECT_THROW(n_step_apply(ctrl, failed), SolverError);
}

TEST(Mpc, ConfigValidation)
{
    const MpcSetup s = make_setup(1e-4, maximize_output(), 5.0, 5.0);
    MpcConfig c = s.config;
    c.horizon = 5;
    EXPECT_THROW(c.validate(1, 1), ConfigError);
    c = s.config;
    c.u_setpoint(0) = 10.0;
    EXPECT_THROW(c.validate(1, 1), ConfigError);
    c = s.config;
    c.y_setpoint(0) = -10.5;
    EXPECT_THROW(c.validate(1, 1), ConfigError);
    c = s.config;
    c.stage_cost = StageCost::quadratic(-MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1));
    EXPECT_THROW(c.validate(1, 1), ConfigError);
    c = s.config;
    c.y_max = 1.0;
    c.u_setpoint(0) = 0.5;
    c.y_setpoint(0) = 0.5;
    // a4 of the last index exceeds 1
    EXPECT_THROW(assemble(c, *s.prediction, s.coeffs, rest_window()), ConfigError);
}
