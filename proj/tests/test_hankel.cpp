#include "ddmpc/error.hpp"
#include "ddmpc/hankel.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ddmpc;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Hankel, ShapeAndEntries)
{
    MatrixXd s(2, 6);
    for (Index j = 0; j < 6; ++j)
        s.col(j) << j, 10 * j;
    for (Index L = 1; L <= 6; ++L) {
        const HankelMatrix h = hankel(s, L);
        ASSERT_EQ(h.entries.rows(), 2 * L);
        ASSERT_EQ(h.entries.cols(), 6 - L + 1);
        for (Index i = 0; i < L; ++i)
            for (Index j = 0; j < 6 - L + 1; ++j)
                EXPECT_EQ(h.entries.block(2 * i, j, 2, 1), s.col(i + j));
    }
    EXPECT_THROW(hankel(s, 7), DimensionError);
    EXPECT_THROW(hankel(s, 0), DimensionError);
}

TEST(Hankel, PersistenceOfExcitationIsMonotone)
{
    const DataRecord d = fixtures::example_data();
    bool previous = true;
    for (Index L = 1; L <= 40; ++L) {
        const PeReport r = is_persistently_exciting(d.inputs(), L);
        EXPECT_EQ(r.required, L);
        if (!previous)
            EXPECT_FALSE(r.persistently_exciting);
        previous = r.persistently_exciting;
    }
    EXPECT_TRUE(is_persistently_exciting(d.inputs(), 16).persistently_exciting);

    // a constant input is exciting of order 1 only
    const MatrixXd c = MatrixXd::Ones(1, 50);
    EXPECT_TRUE(is_persistently_exciting(c, 1).persistently_exciting);
    EXPECT_FALSE(is_persistently_exciting(c, 2).persistently_exciting);
    EXPECT_EQ(is_persistently_exciting(c, 2).rank, 1);
}

TEST(Hankel, SimulatedTrajectoriesAreInTheDataSpan)
{
    const StateSpaceModel sys = fixtures::example_plant();
    const DataRecord d = fixtures::example_data();
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> ud(-10.0, 10.0);
    for (int trial = 0; trial < 10; ++trial) {
        const VectorXd x0 = VectorXd::NullaryExpr(3, [&] { return ud(gen); });
        const MatrixXd u = MatrixXd::NullaryExpr(1, 13, [&] { return ud(gen); });
        const Trajectory traj = simulate(sys, x0, u).trajectory;
        const MembershipResult r = membership_residual(d, traj);
        EXPECT_LE(r.residual, 1e-8);
        // alpha reproduces the trajectory through the clean Hankel matrices
        const Trajectory back = trajectory_from_alpha(d, DataView::clean, 13, r.alpha);
        EXPECT_LE((back.y - traj.y).cwiseAbs().maxCoeff(), 1e-8);

        Trajectory bad = traj;
        bad.y(0, 6) += 1e-2;
        EXPECT_GE(membership_residual(d, bad).residual, 1e-3);
    }
}

TEST(Hankel, ZeroInputSpaceHasStateDimension)
{
    const DataRecord d = fixtures::example_data(0.0);
    for (Index W : {3, 5, 9}) {
        const MatrixXd Z = zero_input_output_basis(d, W);
        EXPECT_EQ(Z.cols(), 3);
        EXPECT_LE((Z.transpose() * Z - MatrixXd::Identity(3, 3)).norm(), 1e-10);
        // columns are free responses: C A^k x stacked
        const MatrixXd O = fixtures::example_plant().observability_matrix(W);
        const MatrixXd proj = O * (O.completeOrthogonalDecomposition().solve(Z));
        EXPECT_LE((proj - Z).norm(), 1e-8);
    }
    EXPECT_EQ(trajectory_space_basis(d.inputs(), d.outputs(DataView::clean), 6).cols(), 6 + 3);
}

TEST(Hankel, ExtendedStatesUsePrefix)
{
    const DataRecord d = fixtures::example_data();
    const MatrixXd xi = extended_state_sequence(d, DataView::noisy, 10);
    ASSERT_EQ(xi.rows(), 6);
    ASSERT_EQ(xi.cols(), 1000 - 10 - 3 + 1);
    // xi_0 holds samples -3..-1
    for (Index i = 0; i < 3; ++i) {
        EXPECT_EQ(xi(i, 0), d.input(i - 3)(0));
        EXPECT_EQ(xi(3 + i, 0), d.output(i - 3, DataView::noisy)(0));
        EXPECT_EQ(xi(i, 5), d.input(5 + i - 3)(0));
    }
    const MatrixXd H = build_h_uxi(d, DataView::noisy, 10);
    EXPECT_EQ(H.rows(), 19);
    EXPECT_EQ(H.cols(), 988);
    Eigen::JacobiSVD<MatrixXd> svd(H);
    EXPECT_GT(svd.singularValues()(18), 1e-6);
}

TEST(Hankel, DataRecordValidation)
{
    EXPECT_THROW(DataRecord(MatrixXd::Ones(1, 5), MatrixXd::Ones(1, 4), MatrixXd::Ones(1, 4), 1, 0.0, 0),
                 DimensionError);
    EXPECT_THROW(DataRecord(MatrixXd::Ones(1, 5), MatrixXd::Ones(1, 5), MatrixXd::Ones(1, 5), 5, 0.0, 0),
                 DimensionError);
    const DataRecord d(MatrixXd::Ones(1, 5), MatrixXd::Ones(1, 5), MatrixXd::Ones(1, 5), 2, 0.0, 0);
    EXPECT_EQ(d.length(), 3);
}
