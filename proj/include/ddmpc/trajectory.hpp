#pragma once

#include <Eigen/Dense>

namespace ddmpc {

/// Paired input/output sequences of equal length. Samples are stored column-wise,
/// so `u` is m x T and `y` is p x T.
struct Trajectory {
    Eigen::MatrixXd u;
    Eigen::MatrixXd y;

    Trajectory() = default;
    /// Throws DimensionError unless both sequences have the same length T >= 1.
    Trajectory(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs);

    Eigen::Index length() const { return u.cols(); }
    Eigen::Index input_dim() const { return u.rows(); }
    Eigen::Index output_dim() const { return y.rows(); }

    /// Stacked column vectors [u_0; u_1; ...] and [y_0; y_1; ...].
    Eigen::VectorXd stacked_u() const;
    Eigen::VectorXd stacked_y() const;
};

/// Stacks the columns of a samples matrix into one vector.
Eigen::VectorXd stack_samples(const Eigen::MatrixXd& samples);

/// Inverse of stack_samples.
Eigen::MatrixXd unstack_samples(const Eigen::VectorXd& stacked, Eigen::Index dim);

} // namespace ddmpc
